//! Python bindings for the `plrank` core.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plrank::graphs::{graph_diagnostics, DiagnosticsOptions};
use plrank::inference::DEFAULT_COST_BUDGET;
use plrank::model::sample_ranking;
use plrank::{existence_check as core_existence, Edge, Error, EstimatorKind, FitConfig, Observation, UtilityVector};

fn to_py(err: Error) -> PyErr {
    if err.is_config() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

fn parse_kind(estimator: &str) -> PyResult<EstimatorKind> {
    estimator.parse().map_err(|e: Error| PyValueError::new_err(e.to_string()))
}

/// Rankings over items `0..n`; each ranking is best first with an optional cutoff.
#[pyclass(module = "plrank_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: plrank::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (n, rankings, cutoffs=None))]
    fn new(n: usize, rankings: Vec<Vec<usize>>, cutoffs: Option<Vec<usize>>) -> PyResult<Self> {
        if let Some(c) = &cutoffs {
            if c.len() != rankings.len() {
                return Err(PyValueError::new_err("cutoffs must match rankings in length"));
            }
        }
        let obs = rankings
            .into_iter()
            .enumerate()
            .map(|(i, order)| {
                let y = cutoffs.as_ref().map_or(order.len(), |c| c[i]);
                Observation::new(order, y)
            })
            .collect::<plrank::Result<Vec<_>>>()
            .map_err(to_py)?;
        Ok(Self { inner: plrank::Dataset::new(n, obs).map_err(to_py)? })
    }

    /// Reads a dataset CSV and its sidecar JSON.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: plrank::io::load_dataset(path.as_ref()).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        plrank::io::save_dataset(path.as_ref(), &self.inner).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, observations={})", self.inner.n(), self.inner.len())
    }
}

#[pyclass(module = "plrank_py", frozen, get_all)]
struct Fit {
    estimate: Vec<f64>,
    estimator: String,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    grad_inf: f64,
    sigma: Option<Vec<f64>>,
    ci_low: Option<Vec<f64>>,
    ci_high: Option<Vec<f64>>,
}

#[pymethods]
impl Fit {
    fn __repr__(&self) -> String {
        format!("Fit(estimator={}, converged={}, iterations={})", self.estimator, self.converged, self.iterations)
    }
}

/// Fits utilities; with `level` set, plug-in intervals are attached.
#[pyfunction]
#[pyo3(signature = (data, estimator="full", tol=1e-8, max_iter=5000, level=None))]
fn fit(data: &Dataset, estimator: &str, tol: f64, max_iter: usize, level: Option<f64>) -> PyResult<Fit> {
    let kind = parse_kind(estimator)?;
    let config = FitConfig { tol_grad_inf: tol, max_iter, ..FitConfig::default() };
    let result = plrank::fit(&data.inner, kind, &config).map_err(to_py)?;
    let report = match level {
        Some(level) => Some(plrank::standard_errors(&result, &data.inner, level, DEFAULT_COST_BUDGET).map_err(to_py)?),
        None => None,
    };
    let column = |f: fn(&plrank::ItemInference) -> f64| report.as_ref().map(|r| r.items.iter().map(f).collect());
    Ok(Fit {
        estimate: result.estimate.values().to_vec(),
        estimator: kind.to_string(),
        log_likelihood: result.final_log_lik,
        iterations: result.iterations,
        converged: result.converged,
        grad_inf: result.final_grad_inf,
        sigma: column(|i| i.sigma),
        ci_low: column(|i| i.ci_low),
        ci_high: column(|i| i.ci_high),
    })
}

/// Returns `(exists, dominant_set)`.
#[pyfunction]
fn existence_check(data: &Dataset) -> (bool, Option<Vec<usize>>) {
    let report = core_existence(&data.inner);
    (report.exists, report.dominant)
}

/// Structural diagnostics at zero utilities, as a JSON string.
#[pyfunction]
#[pyo3(signature = (data, estimator="full", exact_cheeger=false, gamma_re=false))]
fn graph_diag(data: &Dataset, estimator: &str, exact_cheeger: bool, gamma_re: bool) -> PyResult<String> {
    let options = DiagnosticsOptions { exact_cheeger, gamma_re, kind: parse_kind(estimator)?, ..DiagnosticsOptions::default() };
    let diag = graph_diagnostics(&data.inner, &UtilityVector::zeros(data.inner.n()), &options).map_err(to_py)?;
    serde_json::to_string(&diag).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Draws one full ranking of `items` under utilities `u`.
#[pyfunction]
fn sample(u: Vec<f64>, items: Vec<usize>, seed: u64) -> PyResult<Vec<usize>> {
    let u = UtilityVector::new(u).map_err(to_py)?;
    let edge = Edge::new(items).map_err(to_py)?;
    if edge.items().iter().any(|&k| k >= u.len()) {
        return Err(PyValueError::new_err("item out of range"));
    }
    Ok(sample_ranking(&u, &edge, &mut ChaCha8Rng::seed_from_u64(seed)).order().to_vec())
}

#[pymodule]
fn plrank_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(existence_check, m)?)?;
    m.add_function(wrap_pyfunction!(graph_diag, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}

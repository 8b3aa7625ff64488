//! Existence checking and minorize-maximize fitting of the marginal MLE
//! (full, choice-one, choice-y) and of the QMLE under the sum-zero constraint.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{marginal_log_likelihood, quasi_log_likelihood};
use crate::model::{full_breaking, CutoffOverride, Dataset, UtilityVector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Threshold on `||score||_inf / N`.
    pub tol_grad_inf: f64,
    pub max_iter: usize,
    /// Starting point; the zero vector when absent.
    pub initial: Option<UtilityVector>,
    /// Record the log-likelihood after every iteration.
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { tol_grad_inf: 1e-8, max_iter: 5000, initial: None, record_trace: false }
    }
}

impl FitConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.tol_grad_inf > 0.0) {
            return Err(Error::Config("tol_grad_inf must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if let Some(init) = &self.initial {
            init.check_len(n)?;
        }
        Ok(())
    }
}

/// Which likelihood produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EstimatorKind {
    Marginal(CutoffOverride),
    Qmle,
}

impl EstimatorKind {
    pub const FULL: Self = Self::Marginal(CutoffOverride::Full);
    pub const CHOICE_ONE: Self = Self::Marginal(CutoffOverride::Top(1));

    pub fn choice(y: usize) -> Self {
        Self::Marginal(CutoffOverride::Top(y))
    }

    pub fn is_marginal(&self) -> bool {
        matches!(self, Self::Marginal(_))
    }

    /// Dataset with the cutoffs this estimator uses.
    pub fn prepare(&self, data: &Dataset) -> Dataset {
        match self {
            Self::Marginal(rule) => data.with_cutoffs(*rule),
            Self::Qmle => data.clone(),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Qmle => write!(f, "qmle"),
            Self::Marginal(CutoffOverride::Full) => write!(f, "full"),
            Self::Marginal(CutoffOverride::PerObservation) => write!(f, "marginal"),
            Self::Marginal(CutoffOverride::Top(y)) => write!(f, "choice{y}"),
        }
    }
}

impl From<EstimatorKind> for String {
    fn from(kind: EstimatorKind) -> Self {
        kind.to_string()
    }
}

impl TryFrom<String> for EstimatorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qmle" => Ok(Self::Qmle),
            "full" => Ok(Self::FULL),
            "marginal" => Ok(Self::Marginal(CutoffOverride::PerObservation)),
            "choice_one" => Ok(Self::CHOICE_ONE),
            other => other
                .strip_prefix("choice")
                .and_then(|y| y.parse::<usize>().ok())
                .filter(|&y| y >= 1)
                .map(Self::choice)
                .ok_or_else(|| Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub estimate: UtilityVector,
    pub estimator_kind: EstimatorKind,
    pub final_log_lik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_grad_inf: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub exists: bool,
    /// A failing partition side: its members never lose to any item outside it.
    pub dominant: Option<Vec<usize>>,
}

/// Strong connectivity of the loser -> winner digraph built from the fully broken
/// data (respecting cutoffs). Equivalent to every nonempty proper subset
/// containing an item that loses to some item outside it.
pub fn existence_check(data: &Dataset) -> ExistenceReport {
    let n = data.n();
    if n <= 1 {
        return ExistenceReport { exists: true, dominant: None };
    }
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    let mut seen = HashSet::new();
    for obs in data.observations() {
        for (w, l) in full_breaking(obs) {
            if seen.insert((l, w)) {
                graph.add_edge(nodes[l], nodes[w], ());
            }
        }
    }
    let sccs = tarjan_scc(&graph);
    if sccs.len() == 1 {
        return ExistenceReport { exists: true, dominant: None };
    }
    let mut comp = vec![0; n];
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            comp[node.index()] = c;
        }
    }
    let mut has_out = vec![false; sccs.len()];
    for &(l, w) in &seen {
        if comp[l] != comp[w] {
            has_out[comp[l]] = true;
        }
    }
    let dominant = sccs
        .iter()
        .enumerate()
        .filter(|(c, _)| !has_out[*c])
        .map(|(_, scc)| {
            let mut items: Vec<usize> = scc.iter().map(|v| v.index()).collect();
            items.sort_unstable();
            items
        })
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
        .expect("a finite condensation has a sink");
    ExistenceReport { exists: false, dominant: Some(dominant) }
}

fn start_point(config: &FitConfig, n: usize) -> Vec<f64> {
    let mut u = config.initial.clone().unwrap_or_else(|| UtilityVector::zeros(n));
    u.center();
    u.into_inner()
}

fn recenter_exp(log_gamma: &mut [f64], gamma: &mut [f64]) {
    let mean = log_gamma.iter().sum::<f64>() / log_gamma.len() as f64;
    for (l, g) in log_gamma.iter_mut().zip(gamma.iter_mut()) {
        *l -= mean;
        *g = l.exp();
    }
}

/// Marginal MLE by the minorize-maximize iteration
/// `gamma_k <- W_k / sum_i sum_{j <= min(r_i(k), y_i)} 1 / sum_{t >= j} gamma_{pi_i(t)}`.
pub fn fit_marginal_mle(data: &Dataset, cutoff: CutoffOverride, config: &FitConfig) -> Result<FitResult> {
    config.validate(data.n())?;
    let data = data.with_cutoffs(cutoff);
    let report = existence_check(&data);
    if let Some(dominant) = report.dominant {
        return Err(Error::Nonexistence { dominant });
    }
    let n = data.n();
    let big_n = data.len().max(1) as f64;

    // The last position never contributes (its term is identically zero).
    let effective_y: Vec<usize> =
        data.observations().iter().map(|o| o.cutoff().min(o.size() - 1)).collect();
    let mut wins = vec![0.0; n];
    for (obs, &y) in data.observations().iter().zip(&effective_y) {
        for &k in &obs.order()[..y] {
            wins[k] += 1.0;
        }
    }

    let mut log_gamma = start_point(config, n);
    let mut gamma: Vec<f64> = log_gamma.iter().map(|v| v.exp()).collect();
    let mut denom = vec![0.0; n];
    let mut cum = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut grad_inf;
    let mut converged = false;

    loop {
        denom.iter_mut().for_each(|d| *d = 0.0);
        for (obs, &y) in data.observations().iter().zip(&effective_y) {
            let order = obs.order();
            let m = order.len();
            cum.clear();
            let mut suffix: f64 = order[..].iter().map(|&k| gamma[k]).sum();
            let mut running = 0.0;
            for &k in &order[..y] {
                running += 1.0 / suffix;
                cum.push(running);
                suffix -= gamma[k];
            }
            for (p, &k) in order.iter().enumerate().take(m) {
                denom[k] += cum[p.min(y - 1)];
            }
        }
        grad_inf = (0..n)
            .map(|k| (wins[k] - gamma[k] * denom[k]).abs())
            .fold(0.0, f64::max)
            / big_n;
        if config.record_trace {
            let u = UtilityVector::new(log_gamma.clone())?;
            trace.push(marginal_log_likelihood(&u, &data)?);
        }
        if grad_inf <= config.tol_grad_inf {
            converged = true;
            break;
        }
        if iterations == config.max_iter {
            break;
        }
        iterations += 1;
        for k in 0..n {
            log_gamma[k] = (wins[k] / denom[k]).ln();
        }
        recenter_exp(&mut log_gamma, &mut gamma);
    }

    let estimate = UtilityVector::new(log_gamma)?;
    let final_log_lik = marginal_log_likelihood(&estimate, &data)?;
    Ok(FitResult {
        estimate,
        estimator_kind: EstimatorKind::Marginal(cutoff),
        final_log_lik,
        iterations,
        converged,
        final_grad_inf: grad_inf,
        trace,
    })
}

/// Aggregated broken pairs: `(i, j, comparisons, wins of i)` with `i < j`.
pub(crate) fn aggregate_pairs(data: &Dataset) -> Vec<(usize, usize, f64, f64)> {
    let mut agg: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for obs in data.observations() {
        for (w, l) in full_breaking(obs) {
            let (key, i_won) = if w < l { ((w, l), 1.0) } else { ((l, w), 0.0) };
            let e = agg.entry(key).or_insert((0.0, 0.0));
            e.0 += 1.0;
            e.1 += i_won;
        }
    }
    agg.into_iter().map(|((i, j), (c, w))| (i, j, c, w)).collect()
}

/// QMLE: Bradley-Terry minorize-maximize on the fully broken pairs,
/// `gamma_k <- wins_k / sum_{pairs (k, l)} 1 / (gamma_k + gamma_l)`.
pub fn fit_qmle(data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate(data.n())?;
    let report = existence_check(data);
    if let Some(dominant) = report.dominant {
        return Err(Error::Nonexistence { dominant });
    }
    let n = data.n();
    let big_n = data.len().max(1) as f64;
    let pairs = aggregate_pairs(data);
    let mut wins = vec![0.0; n];
    for &(i, j, c, w) in &pairs {
        wins[i] += w;
        wins[j] += c - w;
    }

    let mut log_gamma = start_point(config, n);
    let mut gamma: Vec<f64> = log_gamma.iter().map(|v| v.exp()).collect();
    let mut denom = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut grad_inf;
    let mut converged = false;

    loop {
        denom.iter_mut().for_each(|d| *d = 0.0);
        for &(i, j, c, _) in &pairs {
            let t = c / (gamma[i] + gamma[j]);
            denom[i] += t;
            denom[j] += t;
        }
        grad_inf = (0..n)
            .map(|k| (wins[k] - gamma[k] * denom[k]).abs())
            .fold(0.0, f64::max)
            / big_n;
        if config.record_trace {
            let u = UtilityVector::new(log_gamma.clone())?;
            trace.push(quasi_log_likelihood(&u, data)?);
        }
        if grad_inf <= config.tol_grad_inf {
            converged = true;
            break;
        }
        if iterations == config.max_iter {
            break;
        }
        iterations += 1;
        for k in 0..n {
            log_gamma[k] = (wins[k] / denom[k]).ln();
        }
        recenter_exp(&mut log_gamma, &mut gamma);
    }

    let estimate = UtilityVector::new(log_gamma)?;
    let final_log_lik = quasi_log_likelihood(&estimate, data)?;
    Ok(FitResult {
        estimate,
        estimator_kind: EstimatorKind::Qmle,
        final_log_lik,
        iterations,
        converged,
        final_grad_inf: grad_inf,
        trace,
    })
}

/// Dispatches on the estimator kind.
pub fn fit(data: &Dataset, kind: EstimatorKind, config: &FitConfig) -> Result<FitResult> {
    match kind {
        EstimatorKind::Marginal(rule) => fit_marginal_mle(data, rule, config),
        EstimatorKind::Qmle => fit_qmle(data, config),
    }
}

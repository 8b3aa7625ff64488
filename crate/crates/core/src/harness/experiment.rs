//! Replicated simulation experiments: consistency, CI coverage and the
//! heterogeneity (added within-community edges) study.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{DesignConfig, ResolvedDesign};
use super::svg::{line_chart, Series};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorKind, FitConfig};
use crate::graphs::sample_uniform_edges;
use crate::inference::{standard_errors, DEFAULT_COST_BUDGET};
use crate::model::{sample_order, Dataset, Edge, Observation, UtilityVector};
use crate::normal::two_sided_critical;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PLRANK_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Consistency,
    Coverage,
    Heterogeneity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum UtilityLaw {
    Uniform { lo: f64, hi: f64 },
    Explicit { values: Vec<f64> },
}

impl Default for UtilityLaw {
    fn default() -> Self {
        Self::Uniform { lo: -0.5, hi: 0.5 }
    }
}

impl UtilityLaw {
    /// Draws a centered utility vector.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<UtilityVector> {
        match self {
            Self::Uniform { lo, hi } => {
                let v = (0..n).map(|_| if hi > lo { rng.random_range(*lo..*hi) } else { *lo }).collect();
                UtilityVector::centered(v)
            }
            Self::Explicit { values } => {
                if values.len() != n {
                    return Err(Error::Config(format!("explicit utilities have length {}, n = {n}", values.len())));
                }
                UtilityVector::centered(values.clone())
            }
        }
    }
}

/// Within-community edges appended to a block design, in increasing amounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneitySpec {
    pub additions: Vec<usize>,
    #[serde(default)]
    pub community: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub tol_grad_inf: f64,
    pub max_iter: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        let d = FitConfig::default();
        Self { tol_grad_inf: d.tol_grad_inf, max_iter: d.max_iter }
    }
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub design: DesignConfig,
    #[serde(default)]
    pub utility: UtilityLaw,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_level")]
    pub level: f64,
    pub seed: u64,
    /// Plug-in standard errors and coverage; off by default for consistency runs.
    #[serde(default)]
    pub compute_se: Option<bool>,
    #[serde(default)]
    pub heterogeneity: Option<HeterogeneitySpec>,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub cost_budget: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n_values.is_empty() {
            return Err(Error::Config("n_values must not be empty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("at least one estimator is required".into()));
        }
        if two_sided_critical(self.level).is_none() {
            return Err(Error::Config(format!("confidence level {} must lie in (0, 1)", self.level)));
        }
        for &n in &self.n_values {
            if n < 2 {
                return Err(Error::Config("every n must be at least 2".into()));
            }
            self.design.resolve(n)?;
        }
        match (&self.experiment, &self.heterogeneity) {
            (ExperimentKind::Heterogeneity, None) => {
                return Err(Error::Config("heterogeneity experiments need a `heterogeneity` block".into()))
            }
            (ExperimentKind::Heterogeneity, Some(h)) => {
                if h.additions.is_empty() || h.additions.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::Config("additions must be a nonempty nondecreasing list".into()));
                }
                for &n in &self.n_values {
                    match self.design.resolve(n)? {
                        ResolvedDesign::Hsbm(c) if h.community < c.community_sizes.len() => {
                            if c.community_sizes[h.community] < c.m {
                                return Err(Error::Config("community smaller than the edge size".into()));
                            }
                        }
                        _ => return Err(Error::Config("heterogeneity needs a block design with that community".into())),
                    }
                }
            }
            (_, Some(_)) => return Err(Error::Config("`heterogeneity` is only valid for heterogeneity experiments".into())),
            _ => {}
        }
        if self.fit.tol_grad_inf <= 0.0 || self.fit.max_iter == 0 {
            return Err(Error::Config("invalid fit settings".into()));
        }
        Ok(())
    }

    pub fn computes_se(&self) -> bool {
        self.compute_se.unwrap_or(self.experiment != ExperimentKind::Consistency)
    }

    fn levels(&self) -> Vec<usize> {
        match &self.heterogeneity {
            Some(h) => h.additions.clone(),
            None => vec![0],
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at size `n`:
/// `splitmix64(splitmix64(master ^ splitmix64(n)) ^ rep)`.
pub fn child_seed(master: u64, n: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(n as u64)) ^ rep as u64)
}

/// Worker count from `PLRANK_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(Some(t)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone)]
enum Outcome {
    Done { linf: f64, sigma: Option<f64>, hits: usize, focus_hits: usize, se_seconds: f64 },
    Nonexistent,
    Failed,
}

struct Replication {
    /// `[level][estimator]`
    outcomes: Vec<Vec<Outcome>>,
}

fn observe<R: Rng + ?Sized>(u: &UtilityVector, edges: &[Edge], rng: &mut R) -> Vec<Observation> {
    edges
        .iter()
        .map(|e| Observation::full(sample_order(u.values(), e.items(), rng)).expect("sampled ranking is valid"))
        .collect()
}

fn run_replication(
    config: &ExperimentConfig,
    design: &ResolvedDesign,
    n: usize,
    rep: usize,
    focus: &[usize],
) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(config.seed, n, rep));
    let truth = config.utility.draw(n, &mut rng)?;
    let base_edges = design.sample(&mut rng)?;
    let mut observations = observe(&truth, &base_edges, &mut rng);
    let levels = config.levels();
    let max_add = levels.iter().copied().max().unwrap_or(0);
    if max_add > 0 {
        let m = match design {
            ResolvedDesign::Hsbm(c) => c.m,
            _ => unreachable!("validated"),
        };
        let extra = sample_uniform_edges(focus, m, max_add, &mut rng)?;
        observations.extend(observe(&truth, &extra, &mut rng));
    }
    let base = base_edges.len();
    let fit_config =
        FitConfig { tol_grad_inf: config.fit.tol_grad_inf, max_iter: config.fit.max_iter, ..FitConfig::default() };
    let budget = config.cost_budget.map(u128::from).unwrap_or(DEFAULT_COST_BUDGET);
    let compute_se = config.computes_se();

    let mut outcomes = Vec::with_capacity(levels.len());
    for &added in &levels {
        let data = Dataset::new(n, observations[..base + added].to_vec())?;
        let row = config
            .estimators
            .iter()
            .map(|&kind| {
                let fitted = match fit(&data, kind, &fit_config) {
                    Ok(f) if f.converged => f,
                    Ok(_) => return Outcome::Failed,
                    Err(Error::Nonexistence { .. }) => return Outcome::Nonexistent,
                    Err(_) => return Outcome::Failed,
                };
                let linf = fitted.estimate.linf_distance(&truth);
                if !compute_se {
                    return Outcome::Done { linf, sigma: None, hits: 0, focus_hits: 0, se_seconds: 0.0 };
                }
                let start = Instant::now();
                let report = match standard_errors(&fitted, &data, config.level, budget) {
                    Ok(r) => r,
                    Err(_) => return Outcome::Failed,
                };
                let se_seconds = start.elapsed().as_secs_f64();
                let covered = |k: usize| {
                    let it = &report.items[k];
                    it.ci_low <= truth[k] && truth[k] <= it.ci_high
                };
                Outcome::Done {
                    linf,
                    sigma: Some(report.mean_sigma()),
                    hits: (0..n).filter(|&k| covered(k)).count(),
                    focus_hits: focus.iter().filter(|&&k| covered(k)).count(),
                    se_seconds,
                }
            })
            .collect();
        outcomes.push(row);
    }
    Ok(Replication { outcomes })
}

/// Aggregate over replications for one `(n, added, estimator)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub added: usize,
    pub estimator: EstimatorKind,
    pub replications: usize,
    pub completed: usize,
    /// Replications without a usable fit (`nonexistent` included).
    pub dropped: usize,
    pub nonexistent: usize,
    pub mean_linf: Option<f64>,
    pub q1_linf: Option<f64>,
    pub median_linf: Option<f64>,
    pub q3_linf: Option<f64>,
    /// Fraction of replications (where every estimator completed) in which this
    /// estimator had the smallest error.
    pub best_freq: Option<f64>,
    pub mean_sigma: Option<f64>,
    /// Coverage over all items and completed replications.
    pub coverage: Option<f64>,
    /// Coverage over the first (or configured) community of a block design.
    pub focus_coverage: Option<f64>,
    pub mean_se_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn aggregate(config: &ExperimentConfig, n: usize, focus: usize, reps: &[Replication]) -> Vec<ResultRow> {
    let levels = config.levels();
    let k = config.estimators.len();
    let mut rows = Vec::new();
    for (li, &added) in levels.iter().enumerate() {
        let mut best = vec![0usize; k];
        let mut contests = 0usize;
        for r in reps {
            let errs: Option<Vec<f64>> = r.outcomes[li]
                .iter()
                .map(|o| match o {
                    Outcome::Done { linf, .. } => Some(*linf),
                    _ => None,
                })
                .collect();
            if let Some(errs) = errs {
                contests += 1;
                let winner = (0..k).fold(0, |b, i| if errs[i] < errs[b] { i } else { b });
                best[winner] += 1;
            }
        }
        for (ei, &estimator) in config.estimators.iter().enumerate() {
            let mut linf = Vec::new();
            let mut sigma = Vec::new();
            let (mut hits, mut focus_hits, mut secs, mut nonexistent, mut failed) = (0usize, 0usize, 0.0, 0usize, 0usize);
            for r in reps {
                match &r.outcomes[li][ei] {
                    Outcome::Done { linf: e, sigma: s, hits: h, focus_hits: f, se_seconds } => {
                        linf.push(*e);
                        if let Some(s) = s {
                            sigma.push(*s);
                        }
                        hits += h;
                        focus_hits += f;
                        secs += se_seconds;
                    }
                    Outcome::Nonexistent => nonexistent += 1,
                    Outcome::Failed => failed += 1,
                }
            }
            let completed = linf.len();
            let mean = |v: &[f64]| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
            let mut sorted = linf.clone();
            sorted.sort_by(f64::total_cmp);
            let q = |p: f64| if sorted.is_empty() { None } else { Some(quantile_sorted(&sorted, p)) };
            let se_on = config.computes_se() && completed > 0;
            rows.push(ResultRow {
                n,
                added,
                estimator,
                replications: reps.len(),
                completed,
                dropped: nonexistent + failed,
                nonexistent,
                mean_linf: mean(&linf),
                q1_linf: q(0.25),
                median_linf: q(0.5),
                q3_linf: q(0.75),
                best_freq: if contests > 0 { Some(best[ei] as f64 / contests as f64) } else { None },
                mean_sigma: mean(&sigma),
                coverage: se_on.then(|| hits as f64 / (completed * n) as f64),
                focus_coverage: (se_on && focus > 0).then(|| focus_hits as f64 / (completed * focus) as f64),
                mean_se_seconds: se_on.then(|| secs / completed as f64),
            });
        }
    }
    rows
}

/// Runs every replication of every `n`, in parallel over replications.
/// Per-replication failures are counted, never fatal.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads_from_env()? {
            builder = builder.num_threads(t);
        }
        builder.build().map_err(|e| Error::Config(e.to_string()))?
    };
    let mut rows = Vec::new();
    for &n in &config.n_values {
        let design = config.design.resolve(n)?;
        let focus: Vec<usize> = match (&config.heterogeneity, &design) {
            (Some(h), ResolvedDesign::Hsbm(c)) => c.communities()[h.community].clone().collect(),
            _ => design.first_community().unwrap_or_default(),
        };
        let reps: Vec<Replication> = pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|rep| {
                    run_replication(config, &design, n, rep, &focus).unwrap_or_else(|_| Replication {
                        outcomes: vec![vec![Outcome::Failed; config.estimators.len()]; config.levels().len()],
                    })
                })
                .collect()
        });
        rows.extend(aggregate(config, n, focus.len(), &reps));
    }
    Ok(ExperimentResult { config: config.clone(), rows })
}

/// The heterogeneity study: a block design plus growing numbers of
/// within-community edges, reported as community coverage per level.
pub fn heterogeneity_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.experiment != ExperimentKind::Heterogeneity {
        return Err(Error::Config("expected a heterogeneity experiment".into()));
    }
    run_experiment(config)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentResult {
    pub fn row(&self, n: usize, added: usize, estimator: EstimatorKind) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.n == n && r.added == added && r.estimator == estimator)
    }

    /// Deterministic summary (no timings): identical for identical configs.
    pub fn write_results_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "n", "added", "estimator", "replications", "completed", "dropped", "nonexistent", "mean_linf", "q1_linf",
            "median_linf", "q3_linf", "best_freq", "mean_sigma", "coverage", "focus_coverage",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.added.to_string(),
                r.estimator.to_string(),
                r.replications.to_string(),
                r.completed.to_string(),
                r.dropped.to_string(),
                r.nonexistent.to_string(),
                opt(r.mean_linf),
                opt(r.q1_linf),
                opt(r.median_linf),
                opt(r.q3_linf),
                opt(r.best_freq),
                opt(r.mean_sigma),
                opt(r.coverage),
                opt(r.focus_coverage),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timings_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "added", "estimator", "completed", "mean_se_seconds"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.added.to_string(),
                r.estimator.to_string(),
                r.completed.to_string(),
                opt(r.mean_se_seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn echo(&self) -> Result<serde_json::Value> {
        let resolved = self
            .config
            .n_values
            .iter()
            .map(|&n| {
                Ok(serde_json::json!({
                    "n": n,
                    "design": self.config.design.resolve(n)?,
                    "expected_edges": self.config.design.expected_edges(n)?,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(serde_json::json!({
            "config": self.config,
            "resolved_designs": resolved,
            "seed_rule": "child = splitmix64(splitmix64(seed ^ splitmix64(n)) ^ replication); ChaCha8 stream per replication",
        }))
    }

    fn series(&self, added: Option<usize>, value: impl Fn(&ResultRow) -> Option<f64>) -> Vec<Series> {
        self.config
            .estimators
            .iter()
            .map(|&e| Series {
                label: e.to_string(),
                points: self
                    .rows
                    .iter()
                    .filter(|r| r.estimator == e && added.is_none_or(|a| r.added == a))
                    .filter_map(|r| value(r).map(|v| (r.n as f64, v)))
                    .collect(),
            })
            .collect()
    }

    /// SVG charts keyed by file name.
    pub fn figures(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.config.experiment == ExperimentKind::Heterogeneity {
            for &n in &self.config.n_values {
                let series = self
                    .config
                    .estimators
                    .iter()
                    .map(|&e| Series {
                        label: e.to_string(),
                        points: self
                            .rows
                            .iter()
                            .filter(|r| r.estimator == e && r.n == n)
                            .filter_map(|r| r.focus_coverage.map(|c| (r.added as f64, c)))
                            .collect(),
                    })
                    .collect::<Vec<_>>();
                out.push((
                    format!("focus_coverage_n{n}.svg"),
                    line_chart(&format!("Community coverage, n = {n}"), "added edges", "coverage", &series),
                ));
            }
            return out;
        }
        let first = Some(0);
        out.push((
            "linf_error.svg".into(),
            line_chart("Mean l-infinity error", "n", "error", &self.series(first, |r| r.mean_linf)),
        ));
        out.push((
            "best_frequency.svg".into(),
            line_chart("Smallest-error frequency", "n", "frequency", &self.series(first, |r| r.best_freq)),
        ));
        if self.config.computes_se() {
            out.push(("coverage.svg".into(), line_chart("CI coverage", "n", "coverage", &self.series(first, |r| r.coverage))));
            out.push((
                "sigma.svg".into(),
                line_chart("Mean plug-in standard deviation", "n", "sigma", &self.series(first, |r| r.mean_sigma)),
            ));
        }
        out
    }

    /// Writes `results.csv`, `timings.csv`, `config.echo.json` and
    /// `figures/*.svg`; figure errors are ignored.
    pub fn write_artifacts(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)?;
        self.write_results_csv(fs::File::create(out_dir.join("results.csv"))?)?;
        self.write_timings_csv(fs::File::create(out_dir.join("timings.csv"))?)?;
        let echo = serde_json::to_string_pretty(&self.echo()?)?;
        fs::write(out_dir.join("config.echo.json"), echo + "\n")?;
        let fig_dir = out_dir.join("figures");
        if fs::create_dir_all(&fig_dir).is_ok() {
            for (name, svg) in self.figures() {
                let _ = fs::write(fig_dir.join(name), svg);
            }
        }
        Ok(())
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use plrank::graphs::{graph_diagnostics, sample_hsbm, sample_nurhm, DiagnosticsOptions, DEFAULT_CHEEGER_CAP, DEFAULT_GAMMA_RE_CAP};
use plrank::harness::{
    ingest_races, rank_report, run_experiment, threads_from_env, ExperimentConfig, DEFAULT_MIN_RACES,
};
use plrank::inference::{standard_errors, DEFAULT_COST_BUDGET};
use plrank::io::{load_dataset, save_dataset};
use plrank::{fit, Dataset, EstimatorKind, FitConfig, FitResult, HsbmConfig, NurhmConfig, Observation, UtilityVector};

#[derive(Parser)]
#[command(name = "plrank", version, about = "Plackett-Luce estimation and inference on comparison hypergraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit utilities and write the fit as JSON.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "full")]
        estimator: EstimatorKind,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plug-in standard errors and confidence intervals as CSV.
    Infer {
        #[arg(long)]
        data: PathBuf,
        /// Fit JSON from `fit`; the data are fitted with `--estimator` when absent.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        estimator: EstimatorKind,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = DEFAULT_COST_BUDGET as u64)]
        cost_budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structural diagnostics of a comparison design.
    GraphDiag {
        #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
        data: Option<PathBuf>,
        /// JSON `{"nurhm": {...}}` or `{"hsbm": {...}}`.
        #[arg(long)]
        generate: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Likelihood whose expected Hessian defines the spectral quantities.
        #[arg(long, default_value = "full")]
        estimator: EstimatorKind,
        /// Evaluate at the fitted utilities instead of zero.
        #[arg(long)]
        at_fit: bool,
        #[arg(long)]
        exact_cheeger: bool,
        #[arg(long, default_value_t = DEFAULT_CHEEGER_CAP)]
        cheeger_cap: usize,
        #[arg(long)]
        gamma_re: bool,
        #[arg(long, default_value_t = DEFAULT_GAMMA_RE_CAP)]
        gamma_re_cap: usize,
        #[arg(long)]
        no_spectral: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a replicated simulation experiment.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Convert race results into a ranking dataset.
    Ingest {
        #[arg(long)]
        races: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_RACES)]
        min_races: usize,
        /// Dataset CSV; the sidecar JSON and an `.items.csv` id map are written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Preprocessing report JSON; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Ranked table of the top items with confidence intervals.
    Report {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "qmle")]
        estimator: EstimatorKind,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Item id map written by `ingest`.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

fn classify(err: anyhow::Error) -> Failure {
    use plrank::Error as E;
    match err.downcast_ref::<E>() {
        Some(e) if e.is_config() => Failure::Config(err),
        Some(E::CostBudgetExceeded { .. } | E::BudgetExceeded { .. }) => Failure::Config(err),
        Some(
            E::Data(_)
            | E::Io(_)
            | E::Csv(_)
            | E::Json(_)
            | E::InvalidEdge(_)
            | E::InvalidObservation(_)
            | E::DimensionMismatch { .. }
            | E::NonFinite { .. }
            | E::Nonexistence { .. }
            | E::IsolatedVertex(_)
            | E::Disconnected,
        ) => Failure::Data(err),
        _ => Failure::Other(err),
    }
}

fn config_err(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(err.into())
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn load_data(path: &Path) -> std::result::Result<Dataset, Failure> {
    load_dataset(path).with_context(|| format!("reading dataset {}", path.display())).map_err(|e| Failure::Data(e))
}

#[derive(Serialize, Deserialize)]
struct FitOutput {
    #[serde(flatten)]
    fit: FitResult,
    n_k: Vec<usize>,
}

fn fit_config(tol: f64, max_iter: usize) -> FitConfig {
    FitConfig { tol_grad_inf: tol, max_iter, ..FitConfig::default() }
}

fn run_fit(data: &Dataset, estimator: EstimatorKind, config: &FitConfig) -> std::result::Result<FitResult, Failure> {
    let result = fit(data, estimator, config).map_err(|e| classify(e.into()))?;
    if !result.converged {
        eprintln!(
            "warning: {estimator} did not converge in {} iterations (gradient {:e})",
            result.iterations, result.final_grad_inf
        );
    }
    Ok(result)
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum GenerateConfig {
    Nurhm(NurhmConfig),
    Hsbm(HsbmConfig),
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Fit { data, estimator, tol, max_iter, out } => {
            let data = load_data(&data)?;
            let result = run_fit(&data, estimator, &fit_config(tol, max_iter))?;
            let output = FitOutput { fit: result, n_k: data.degrees() };
            let json = serde_json::to_vec_pretty(&output).map_err(|e| Failure::Other(e.into()))?;
            write_output(out.as_deref(), &json).map_err(Failure::Other)?;
        }
        Command::Infer { data, fit: fit_path, estimator, level, cost_budget, out } => {
            let data = load_data(&data)?;
            let fitted = match fit_path {
                Some(p) => {
                    let text = fs::read_to_string(&p)
                        .with_context(|| format!("reading fit {}", p.display()))
                        .map_err(Failure::Data)?;
                    let output: FitOutput = serde_json::from_str(&text)
                        .with_context(|| format!("parsing fit {}", p.display()))
                        .map_err(Failure::Data)?;
                    output.fit
                }
                None => run_fit(&data, estimator, &FitConfig::default())?,
            };
            let report = standard_errors(&fitted, &data, level, cost_budget as u128).map_err(|e| classify(e.into()))?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf).map_err(|e| Failure::Other(e.into()))?;
            write_output(out.as_deref(), &buf).map_err(Failure::Other)?;
        }
        Command::GraphDiag {
            data,
            generate,
            seed,
            estimator,
            at_fit,
            exact_cheeger,
            cheeger_cap,
            gamma_re,
            gamma_re_cap,
            no_spectral,
            out,
        } => {
            let data = match (data, generate) {
                (Some(path), _) => load_data(&path)?,
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))
                        .map_err(config_err)?;
                    let config: GenerateConfig = serde_json::from_str(&text)
                        .with_context(|| format!("parsing {}", path.display()))
                        .map_err(config_err)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let (n, edges) = match &config {
                        GenerateConfig::Nurhm(c) => (c.n, sample_nurhm(c, &mut rng)),
                        GenerateConfig::Hsbm(c) => (c.n, sample_hsbm(c, &mut rng)),
                    };
                    let edges = edges.map_err(|e| classify(e.into()))?;
                    let obs = edges
                        .iter()
                        .map(|e| Observation::full(e.items().to_vec()))
                        .collect::<plrank::Result<Vec<_>>>()
                        .map_err(|e| Failure::Other(e.into()))?;
                    Dataset::new(n, obs).map_err(|e| Failure::Other(e.into()))?
                }
                (None, None) => return Err(config_err(anyhow::anyhow!("one of --data or --generate is required"))),
            };
            let u = if at_fit {
                run_fit(&data, estimator, &FitConfig::default())?.estimate
            } else {
                UtilityVector::zeros(data.n())
            };
            let options = DiagnosticsOptions {
                exact_cheeger,
                cheeger_cap,
                gamma_re,
                gamma_re_cap,
                spectral: !no_spectral,
                kind: estimator,
                ..DiagnosticsOptions::default()
            };
            let diag = graph_diagnostics(&data, &u, &options).map_err(|e| classify(e.into()))?;
            let json = serde_json::to_vec_pretty(&diag).map_err(|e| Failure::Other(e.into()))?;
            write_output(out.as_deref(), &json).map_err(Failure::Other)?;
        }
        Command::Experiment { config, out_dir } => {
            threads_from_env().map_err(|e| config_err(e))?;
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))
                .map_err(config_err)?;
            let config = ExperimentConfig::from_json(&text).map_err(config_err)?;
            let result = run_experiment(&config).map_err(|e| classify(e.into()))?;
            result.write_artifacts(&out_dir).map_err(|e| Failure::Other(e.into()))?;
            eprintln!("wrote {} result rows to {}", result.rows.len(), out_dir.display());
        }
        Command::Ingest { races, min_races, out, report } => {
            let (data, summary) = ingest_races(&races, min_races)
                .map_err(|e| classify(anyhow::Error::from(e).context(format!("ingesting {}", races.display()))))?;
            save_dataset(&out, &data).map_err(|e| Failure::Other(e.into()))?;
            let items_path = out.with_extension("items.csv");
            let mut w = csv::Writer::from_path(&items_path).map_err(|e| Failure::Other(e.into()))?;
            w.write_record(["item", "id"]).map_err(|e| Failure::Other(e.into()))?;
            for (i, id) in summary.horse_ids.iter().enumerate() {
                w.write_record([i.to_string(), id.clone()]).map_err(|e| Failure::Other(e.into()))?;
            }
            w.flush().map_err(|e| Failure::Other(e.into()))?;
            let json = serde_json::to_vec_pretty(&serde_json::json!({
                "input_rows": summary.input_rows,
                "input_horses": summary.input_horses,
                "input_races": summary.input_races,
                "removed_few_races": summary.removed_few_races,
                "removed_all_wins": summary.removed_all_wins,
                "removed_all_losses": summary.removed_all_losses,
                "dropped_races": summary.dropped_races,
                "passes": summary.passes,
                "horses": summary.horses,
                "races": summary.races,
            }))
            .map_err(|e| Failure::Other(e.into()))?;
            write_output(report.as_deref(), &json).map_err(Failure::Other)?;
        }
        Command::Report { data, estimator, top_k, level, labels, out } => {
            let data = load_data(&data)?;
            let fitted = run_fit(&data, estimator, &FitConfig::default())?;
            let inference =
                standard_errors(&fitted, &data, level, DEFAULT_COST_BUDGET).map_err(|e| classify(e.into()))?;
            let table = rank_report(&fitted, &inference, &data, top_k).map_err(|e| classify(e.into()))?;
            let labels = match labels {
                Some(p) => Some(read_labels(&p).map_err(Failure::Data)?),
                None => None,
            };
            let mut buf = Vec::new();
            table.write_csv(&mut buf, labels.as_deref()).map_err(|e| Failure::Other(e.into()))?;
            write_output(out.as_deref(), &buf).map_err(Failure::Other)?;
        }
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let item: usize = rec.get(0).unwrap_or("").parse().with_context(|| format!("row {}: bad item", i + 2))?;
        anyhow::ensure!(item == labels.len(), "row {}: items must be listed in order", i + 2);
        labels.push(rec.get(1).unwrap_or("").to_string());
    }
    Ok(labels)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let code = failure.code();
            let (Failure::Config(e) | Failure::Data(e) | Failure::Other(e)) = failure;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

//! Simulation experiments, race-data ingestion and reporting.

mod design;
mod experiment;
mod races;
mod report;
mod svg;

pub use design::{CountFormula, DesignConfig, ResolvedDesign};
pub use experiment::{
    child_seed, heterogeneity_experiment, run_experiment, threads_from_env, ExperimentConfig, ExperimentKind,
    ExperimentResult, FitSettings, HeterogeneitySpec, ResultRow, UtilityLaw, THREADS_ENV,
};
pub use races::{build_race_dataset, ingest_races, read_race_records, IngestReport, RaceRecord, DEFAULT_MIN_RACES};
pub use report::{rank_report, RankRow, RankTable, RANK_COLUMNS};
pub use svg::{line_chart, Series};

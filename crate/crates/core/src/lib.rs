//! Plackett-Luce estimation on comparison hypergraphs: marginal and
//! quasi-likelihood estimators, plug-in standard errors, random hypergraph
//! designs and their structural diagnostics.

pub mod error;
pub mod estimators;
pub mod graphs;
pub mod harness;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod normal;

pub use error::{Error, Result};
pub use estimators::{existence_check, fit, fit_marginal_mle, fit_qmle, EstimatorKind, ExistenceReport, FitConfig, FitResult};
pub use graphs::{GraphDiagnostics, HsbmConfig, NurhmConfig};
pub use inference::{standard_errors, InferenceReport, ItemInference};
pub use likelihood::{HessianMatrix, ScoreVector};
pub use model::{CutoffOverride, Dataset, Edge, Observation, Ranking, UtilityVector};

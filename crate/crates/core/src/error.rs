use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("utility vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("utility entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid edge: {0}")]
    InvalidEdge(String),

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("enumeration budget exceeded: {required} terms required, cap is {cap}")]
    BudgetExceeded { required: u128, cap: u128 },

    #[error("standard-error cost budget exceeded: {total} prefixes required, cap is {cap}")]
    CostBudgetExceeded {
        total: u128,
        cap: u128,
        /// (observation index, prefix count) for every observation that contributes
        per_edge: Vec<(usize, u128)>,
    },

    #[error("the estimator does not exist: items {dominant:?} never lose to the remaining items")]
    Nonexistence { dominant: Vec<usize> },

    #[error("fit did not converge; standard errors need a converged fit")]
    NotConverged,

    #[error("vertex {0} has zero degree")]
    IsolatedVertex(usize),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("n = {n} exceeds the exact-enumeration cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the failure comes from a malformed configuration rather than from data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::SizeCap { .. })
    }
}

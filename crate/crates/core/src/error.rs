use thiserror::Error;

use crate::models::StepFunction;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("the unit weight scheme is not a bootstrap scheme (weight variance c^2 must be positive)")]
    NotBootstrapScheme,

    #[error("criterion is -inf: event at {time} carries no hazard mass")]
    InvalidSupport { time: f64 },

    #[error("empty weighted risk set at time {time}")]
    DegenerateRiskSet { time: f64 },

    /// The nuisance solver ran out of iterations. Carries the last iterate so
    /// callers can inspect how far from optimal it was.
    #[error("nuisance solver stopped after {iterations} iterations with KKT residual {kkt_residual:e}")]
    IterationLimit {
        iterations: usize,
        kkt_residual: f64,
        last: Box<StepFunction>,
    },

    #[error("design matrix is rank deficient at column `{column}`")]
    SingularDesign { column: String },

    #[error("profile curvature is not negative definite: {0}")]
    Curvature(String),

    #[error("need at least {needed} bootstrap replicates, have {available}")]
    InsufficientReplicates { needed: usize, available: usize },

    #[error("bootstrap unstable: {failures} of {total} replicates failed (first failure: {first})")]
    UnstableBootstrap {
        failures: usize,
        total: usize,
        first: String,
    },

    #[error("optimizer failed: {0}")]
    Optimization(String),

    #[error("unsupported model for this operation: {0}")]
    UnsupportedModel(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

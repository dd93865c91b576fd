use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver failure: {0}")]
    EigenFailure(String),

    #[error("linear solver breakdown: {0}")]
    LinearSolveFailure(String),

    #[error("no supersolution: the scalar inequality M >= lambda*M^q*|g|^q + M^r*|g|^r is infeasible at lambda = {lambda}")]
    NoSupersolution { lambda: f64 },

    #[error("ordering violation in monotone iteration at step {step}: {detail}")]
    OrderingViolation { step: usize, detail: String },

    #[error("iteration did not converge after {iters} steps (last increment {last_increment:.3e})")]
    NoConvergence { iters: usize, last_increment: f64 },

    #[error("Newton failure: {0}")]
    NewtonFailure(String),

    #[error("mountain pass search failed: {0}")]
    MountainPassFailure(String),

    #[error("grid too coarse near y=0: {layers} layers below y = Y_max/100, need at least 3")]
    GridTooCoarse { layers: usize },

    #[error("minimizer did not converge: {0}")]
    MinimizerFailure(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid_param(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

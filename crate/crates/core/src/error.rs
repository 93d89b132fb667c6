use thiserror::Error;

/// Errors raised by the model, estimator and I/O layers.
#[derive(Debug, Error)]
pub enum GmnarError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("parameters are not stationary (kappa = {kappa:.6} >= 1)")]
    NonStationary { kappa: f64 },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GmnarError>;

use thiserror::Error;

use crate::model::Arm;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{message} at row {row}")]
    Validation { row: usize, message: String },

    #[error("{0} arm empty")]
    EmptyArm(Arm),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("propensity fit did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("separation detected: fitted propensity scores reach 0 or 1")]
    Separation,

    #[error("degenerate propensity fit: {0}")]
    DegenerateFit(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("risk set exhausted at time {time}: zero total weight at an event time")]
    RiskSetExhausted { time: f64 },

    #[error("{failed} of {total} replications failed, above the allowed fraction")]
    TooManyFailures { failed: usize, total: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

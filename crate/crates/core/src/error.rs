use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: wrong lengths, non-finite values, violated preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    /// An iterative kernel did not converge within its sweep budget.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A filter or rule configuration that cannot work on the given operator.
    #[error("invalid configuration: {0}")]
    Configuration(String),

    /// All samples coincide, so a variance-based noise estimate is zero.
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("discrepancy search did not stop within k_max = {k_max} steps (residual {residual:e} > delta {delta:e})")]
    NonTermination { k_max: usize, residual: f64, delta: f64 },

    #[error("too many failed replications: {failed} of {total}")]
    StudyFailed { failed: usize, total: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateBatch(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

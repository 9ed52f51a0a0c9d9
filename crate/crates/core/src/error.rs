//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The label budget is exhausted; treated as a stop condition by the
    /// learners, never as a crash.
    #[error("label budget exhausted")]
    BudgetExhausted,

    /// No test draw fell beyond the requested margin, so the agreement
    /// fraction is undefined.
    #[error("no test draws beyond the margin after {attempts} attempts")]
    NoMarginSamples { attempts: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

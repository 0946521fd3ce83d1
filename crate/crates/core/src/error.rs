//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A covariance matrix (or derived quantity) violates the physicality
    /// constraints of a two-mode Gaussian state beyond numerical tolerance.
    #[error("unphysical state: {0}")]
    Unphysical(String),

    /// An iterative numerical routine failed to reach its tolerance.
    #[error("numerical routine did not converge: {0}")]
    NonConverged(String),

    /// The security-parameter budget is inconsistent (e.g. no residual left
    /// to split between the smoothing and privacy-amplification parameters).
    #[error("security budget error: {0}")]
    Budget(String),

    /// A data or configuration file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn unphysical(msg: impl Into<String>) -> Self {
        Error::Unphysical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by model construction, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its domain (negative variance, gamma outside (0,1], ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Inputs are structurally inconsistent (length mismatch, non-square matrix, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The eigensolver failed to converge.
    #[error("eigensolver did not converge: {0}")]
    Eigen(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file could not be parsed into the expected format.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_parameter(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

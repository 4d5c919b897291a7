use thiserror::Error;

/// Errors produced by the enhancement toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a shape, range or content precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input is well-formed but carries no usable information (e.g. digital silence).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A numerical routine failed (singular matrix, non-finite result).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Weight file is malformed or does not match the requested configuration.
    #[error("weight format error: {0}")]
    Format(String),

    /// Physically meaningless parameter combination.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Rejection sampling gave up.
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

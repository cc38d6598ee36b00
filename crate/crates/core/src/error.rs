use thiserror::Error;

/// Errors raised by the modeling and optimization layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmogError {
    /// A caller supplied arguments that violate an operation's contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A factorization or solve failed, even after jitter escalation.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// An operation was called on a model that is missing required state.
    #[error("invalid state: {0}")]
    State(String),
    /// A persisted model could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SmogError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SmogError::InvalidArgument(msg.into()))
}

use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum EchoError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EchoError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(EchoError::InvalidArgument(msg.into()))
}

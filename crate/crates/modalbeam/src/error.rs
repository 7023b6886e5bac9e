use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A requested configuration is outside the supported envelope.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    /// Numerical procedure failed to reach its advertised accuracy.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// File format violation while importing data.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

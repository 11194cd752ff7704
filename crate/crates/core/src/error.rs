use thiserror::Error;

/// Errors produced by the laboratory.
///
/// The variants map one-to-one onto the CLI exit codes: configuration
/// problems, numerical breakdowns, precondition rejections, and invalid
/// arguments to pure functions (`Domain`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error("rejected: {0}")]
    Rejected(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

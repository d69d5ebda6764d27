use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied inputs that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A single (K, structure) cell could not be fitted.
    #[error("fit failure: {0}")]
    FitFailure(String),

    /// The pipeline as a whole cannot proceed.
    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

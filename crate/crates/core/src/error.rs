use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value, detected before any work is done.
    #[error("configuration error: {0}")]
    Config(String),

    /// An API was called in a way that violates its contract
    /// (wrong dimensions, stepping a finished episode, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A training loss or parameter became NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Not enough data to compute a statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

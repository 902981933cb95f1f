use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the models, estimators and file formats in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a physical model.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or malformed arguments (length mismatch, bad config value).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: need at least {needed} usable samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The force record never brackets contact onset inside the sensor band.
    #[error("no surface found: {0}")]
    NoSurfaceFound(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the clustering library.
#[derive(Debug, Error)]
pub enum TikError {
    /// An input fell outside the domain of a function (non-finite value, negative lambda).
    #[error("domain error: {0}")]
    Domain(String),

    /// A result could not be represented as a finite f64.
    #[error("range error: {0}")]
    Range(String),

    /// The caller asked for something inconsistent (bad shapes, n <= K, empty grid).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: row {row}, column '{column}': cannot parse '{value}' as a finite number")]
    ParseCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, TikError>;

pub(crate) fn usage(msg: impl Into<String>) -> TikError {
    TikError::Usage(msg.into())
}

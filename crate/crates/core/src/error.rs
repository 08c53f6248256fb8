use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented invariant (bad config, bad label, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// An operation was called outside its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Tensor or config dimensions do not line up.
    #[error("dimension mismatch for `{name}`: expected {expected:?}, found {found:?}")]
    Dimension {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    /// A NaN or infinity showed up where a finite number is required.
    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("{path}:{line}: {msg}")]
    Schema {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Schema { .. } | Error::Json(_) | Error::Io { .. }
        )
    }
}

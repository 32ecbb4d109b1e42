use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("linear system is rank deficient ({0})")]
    RankDeficient(String),

    /// Experiment configuration failed schema validation.
    #[error("config error: {0}")]
    Config(String),

    /// Input data could not be parsed or failed validation.
    #[error("data error in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("replication {index} failed: {message}")]
    Replication { index: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the experiment configuration rather than the
    /// data it points at.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: empty dataset")]
    EmptyDataset { path: PathBuf },

    #[error("empty corpus: no document contains any token")]
    EmptyCorpus,

    #[error("single-class training set")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("AUC undefined: truth labels contain a single class")]
    AucUndefined,

    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },

    #[error("encoder backend `{backend}`: {message}")]
    Backend { backend: String, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed results file: {0}")]
    Results(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}

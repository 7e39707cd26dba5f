use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("index error: {0}")]
    Index(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("{path}: malformed file at byte offset {offset}: {msg}")]
    Format { path: PathBuf, offset: u64, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("non-finite {what} at step {step}")]
    Diverged { step: usize, what: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{file}: missing column `{column}`")]
    Schema { file: PathBuf, column: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

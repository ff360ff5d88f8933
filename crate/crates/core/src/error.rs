use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("distribution error: {0}")]
    Distribution(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("encoding error in {path}: invalid UTF-8 at byte offset {offset}")]
    Encoding { path: PathBuf, offset: usize },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("label error: target {target} at position {position} is outside [0, {classes})")]
    Label {
        target: usize,
        position: usize,
        classes: usize,
    },

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite loss {loss} at batch {batch} of epoch {epoch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },

    #[error("history error at line {line}: {message}")]
    History { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

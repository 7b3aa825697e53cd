use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("arity error: expected {expected} {what}, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid descriptor: {0}")]
    Descriptor(String),

    #[error("descriptor mismatch: {0}")]
    DescriptorMismatch(String),

    #[error("grid of size {grid} aliases frequencies up to {degree} (need at least {needed})")]
    Aliasing {
        grid: usize,
        degree: usize,
        needed: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("numerical guard: {0}")]
    NumericalGuard(String),

    #[error("scaler error: {0}")]
    Scaler(String),

    #[error("integration error at t={time}: {msg}")]
    Integration { time: f64, msg: String },

    #[error("training diverged in epoch {epoch}: {msg}")]
    Training { epoch: usize, msg: String },

    #[error("parse error in {path}, line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

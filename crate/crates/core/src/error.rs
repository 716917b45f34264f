use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid spectral library: {0}")]
    InvalidLibrary(String),

    #[error("invalid label map: {0}")]
    InvalidLabels(String),

    #[error("unknown material {0:?}")]
    UnknownMaterial(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all-zero data: SNR is undefined")]
    ZeroSignal,

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("non-finite value in factors at iteration {iteration}")]
    NonFinite { iteration: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("degenerate region {0}: empty after clamping to image bounds")]
    DegenerateRegion(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid training data: {0}")]
    InvalidData(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

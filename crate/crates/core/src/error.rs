use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PvsError {
    /// A precondition on an argument does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: String, actual: String },

    #[error("coordinate ({x}, {y}, {z}) outside grid {dims:?}")]
    OutOfRange {
        x: usize,
        y: usize,
        z: usize,
        dims: [usize; 3],
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("backward pass called without a matching forward cache")]
    MissingCache,

    #[error("non-finite loss in batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<PvsError>,
    },
}

impl PvsError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PvsError::InvalidInput(msg.into())
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        PvsError::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PvsError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the file system rather than of the data.
    pub fn is_io(&self) -> bool {
        match self {
            PvsError::Io { .. } => true,
            PvsError::Frame { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T, E = PvsError> = std::result::Result<T, E>;

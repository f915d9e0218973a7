use std::path::PathBuf;

use crate::matrix::Orientation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unmatched dimension: {0}")]
    Dimension(String),

    #[error("wrong matrix orientation: expected {expected}, got {actual}")]
    Orientation {
        expected: &'static str,
        actual: Orientation,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: expected at least {expected} lines, found {actual}")]
    PrematureEof {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("{path}:{line}: {message}")]
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

    #[error("non-finite training cost {cost} at epoch {epoch}, batch {batch}")]
    NonFiniteCost { epoch: usize, batch: usize, cost: f64 },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

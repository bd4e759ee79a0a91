use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value in {layer}")]
    Numeric { layer: &'static str },

    #[error("strategy `{strategy}` failed: {msg}")]
    Strategy { strategy: String, msg: String },

    #[error("unknown strategy `{name}` (available: {})", available.join(", "))]
    UnknownStrategy {
        name: String,
        available: Vec<String>,
    },

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("unpickling failed: {0}")]
    Pickle(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

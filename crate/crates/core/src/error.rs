use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed or unsupported file layout.
    #[error("format error: {0}")]
    Format(String),
    /// Well-formed file carrying values that violate a type invariant.
    #[error("data error: {0}")]
    Data(String),
    /// Caller broke a precondition (length or resolution mismatch, empty view set, ...).
    #[error("contract error: {0}")]
    Contract(String),
    /// Invalid configuration, camera file or synthetic scene spec.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

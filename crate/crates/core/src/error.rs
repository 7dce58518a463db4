use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("node index {index} out of range for graph with {n_nodes} nodes")]
    NodeOutOfRange { index: usize, n_nodes: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} has size {size}, exceeding the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("not a partition: {0}")]
    NotAPartition(String),

    #[error("node sets differ: {0}")]
    Mismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::Format { .. } => ErrorClass::Io,
            Error::Numerical(_) => ErrorClass::Numerical,
            Error::EmptyGraph
            | Error::NodeOutOfRange { .. }
            | Error::InvalidConfig(_)
            | Error::CapExceeded { .. }
            | Error::NotAPartition(_)
            | Error::Mismatch(_) => ErrorClass::Config,
        }
    }
}

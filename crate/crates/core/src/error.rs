//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph error: {0}")]
    Graph(String),

    #[error("infeasible flow: {0}")]
    Flow(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("instance too large for the oracle: {0} detections (limit {1})")]
    OracleGuard(usize, usize),
}

impl Error {
    /// Process exit code the CLI maps this error to: 1 for input
    /// problems, 2 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver(_) | Error::OracleGuard(..) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

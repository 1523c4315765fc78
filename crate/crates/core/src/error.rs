use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied an argument outside the operation's contract.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An input lies outside the domain where the quantity is defined
    /// (for example a nonpositive eigenvalue where the positive cone is required).
    #[error("domain error: {0}")]
    Domain(String),

    /// The denominator sigma_k vanished.
    #[error("singular denominator: sigma_{k} = {value:e}{}", node.map(|i| format!(" at node {i}")).unwrap_or_default())]
    Singular {
        k: usize,
        value: f64,
        node: Option<usize>,
    },

    /// A numerical precondition (such as eigenvalue separation) is not met.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An iteration did not reach its tolerance.
    #[error("no convergence: {reason} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        reason: String,
        iterations: usize,
        residual: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Every variant maps onto one of the stable CLI exit codes through
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation received too few or malformed arguments.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Graph construction would exceed the configured edge budget.
    #[error("edge budget exceeded: {requested} edges requested, budget is {budget}")]
    EdgeBudget { requested: u64, budget: u64 },

    /// Unknown workload preset.
    #[error("unknown workload `{name}`; valid presets: {valid}")]
    UnknownWorkload { name: String, valid: String },

    /// Invalid experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A CSV row failed to parse.
    #[error("{path}: line {line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },

    /// Filesystem failure.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An internal consistency check failed.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage/config, 2 I/O, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Invariant(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("cannot select {k} instants from {available} candidates")]
    TooFewCandidates { k: usize, available: usize },

    #[error("{}:{line}: {message}", path.display())]
    Profile {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: expected {expected} rows, found {found}", path.display())]
    ProfileLength {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("exhaustive oracle limit exceeded ({0}); use greedy mode")]
    OracleTooLarge(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library. Each variant names the module contract it
/// belongs to so the CLI can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("similarity undefined: {0}")]
    Sim(String),
    #[error("batch error: {0}")]
    Batch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a malformed or infeasible configuration
    /// rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Generation(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

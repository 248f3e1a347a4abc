use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("instance {id}: {message}")]
    Validation { id: String, message: String },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("input of {needed} tokens exceeds budget of {budget} (test context {test_context}, first hunk {first_hunk})")]
    Truncation {
        test_context: usize,
        first_hunk: usize,
        needed: usize,
        budget: usize,
    },

    #[error("expected output of {tokens} tokens exceeds budget of {budget}")]
    OutputTooLong { tokens: usize, budget: usize },

    #[error("edit sequence encoding failed: {0}")]
    Encoding(String),

    #[error("replacement {index} target occurs {occurrences} times in working text")]
    Ambiguity { index: usize, occurrences: usize },

    #[error("edit sequence parse error at token {position}: {message}")]
    EditParse { position: usize, message: String },

    #[error("backend transport failed after {retries} retries: {message}")]
    Transport { retries: u32, message: String },

    #[error("backend protocol error: {0}")]
    Protocol(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("git: {0}")]
    Git(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn validation(id: &str, message: impl Into<String>) -> Self {
        Error::Validation { id: id.to_string(), message: message.into() }
    }
}

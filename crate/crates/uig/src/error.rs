//! Crate-wide error type.

use crate::image::MediaKind;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A backend call failed after the retry policy was exhausted.
    #[error("backend failure after {attempts} attempt(s){}: {message}", status_suffix(*.status))]
    BackendFailure {
        message: String,
        /// Terminal HTTP status, when the failure was an HTTP error response.
        status: Option<u16>,
        attempts: u32,
    },

    /// The understanding response contained no recognizable verdict line.
    #[error("unparseable verdict: no MATCH line found in response ({snippet:?})")]
    UnparseableVerdict { snippet: String },

    /// Verdict was "No" but the response carried no editing instruction.
    #[error("verdict was No but the response contained no EDIT line")]
    MissingEditPrompt,

    #[error("media mismatch: backend expects {expected}, image is {found}")]
    MediaMismatch { expected: MediaKind, found: MediaKind },

    /// Simulator editor could not interpret the instruction by any route.
    #[error("unparseable edit instruction: {instruction:?}")]
    UnparseableEditInstruction { instruction: String },

    #[error("inconsistent trace: {0}")]
    InconsistentTrace(String),

    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },

    #[error("unknown {kind} {word:?} at {line}:{col}")]
    Vocabulary {
        line: usize,
        col: usize,
        word: String,
        kind: &'static str,
    },

    /// A suite or report record failed validation. `record` is 1-based.
    #[error("schema error in record {record}: {message}")]
    Schema { record: usize, message: String },

    #[error("address not found in store: {address}")]
    NotFound { address: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid template: {0}")]
    Template(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn status_suffix(status: Option<u16>) -> String {
    match status {
        Some(s) => format!(" (HTTP {s})"),
        None => String::new(),
    }
}

impl Error {
    pub fn backend(message: impl Into<String>) -> Self {
        Error::BackendFailure {
            message: message.into(),
            status: None,
            attempts: 1,
        }
    }

    /// True for errors that should map to CLI exit code 1 (backend trouble)
    /// rather than 2 (usage).
    pub fn is_backend_failure(&self) -> bool {
        matches!(self, Error::BackendFailure { .. })
    }
}

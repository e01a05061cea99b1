use thiserror::Error;

/// Errors produced by the decoding library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented invariant (malformed distribution, zero vector, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument was outside its allowed range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A collaborator broke its contract (missing candidate representation, bad backend output).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A backend failure, tagged with the generation step it happened at.
    #[error("backend failed at step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("backend error: {0}")]
    Backend(String),

    /// A malformed line in a line-delimited input file (1-based line number).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("corpus mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

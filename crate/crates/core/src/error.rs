use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A constraint set contains (or derives) both ML and CL for one pair.
    #[error("conflicting constraints on items {a} and {b}")]
    Conflict { a: usize, b: usize },

    /// One item constrained to two different classes (1-based in the message).
    #[error("item {item} constrained to both class {first} and class {second}")]
    LabelConflict {
        item: usize,
        first: usize,
        second: usize,
    },

    /// Malformed input file content.
    #[error("{path}: line {line}: {message}")]
    Format {
        path: String,
        line: u64,
        message: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

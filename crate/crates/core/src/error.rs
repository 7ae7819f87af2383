use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input lies outside the domain of a physical or numerical formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or model description violates one of its invariants.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// The dataset does not have the structure an operation requires.
    #[error("dataset structure: {0}")]
    Structure(String),

    #[error("no stored field for condition `{0}`")]
    MissingField(String),

    /// A submission failed validation against the test split.
    #[error("submission rejected: {0}")]
    Submission(String),

    /// File content does not match the expected schema.
    #[error("{path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    /// A numerical kernel failed (singular system, disconnected graph, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate:e}): {detail}")]
    Diverged {
        epoch: usize,
        learning_rate: f64,
        detail: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

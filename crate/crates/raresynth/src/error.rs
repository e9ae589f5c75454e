//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("labeling budget exhausted ({spent} of {budget} labels used)")]
    BudgetExhausted { spent: usize, budget: usize },

    #[error("search space too large: {size} exceeds enumeration cap {cap}")]
    SpaceTooLarge { size: String, cap: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("training diverged at stage {stage}, iteration {iteration}: {what}")]
    Diverged {
        stage: usize,
        iteration: usize,
        what: String,
    },

    #[error("checkpoint format error in {path}: {what}")]
    CheckpointFormat { path: String, what: String },

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Whether this error is a usage/configuration problem (CLI exit code 2)
    /// as opposed to a runtime failure (exit code 1).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidSchema(_)
                | Error::SpaceTooLarge { .. }
                | Error::FileNotFound(_)
        )
    }
}

pub(crate) fn io_err(path: impl Into<String>, source: std::io::Error) -> Error {
    Error::Io {
        path: path.into(),
        source,
    }
}

use thiserror::Error;

/// Errors raised by protocol construction, analysis and exploration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("history corruption at event {index}: {reason}")]
    HistoryCorruption { index: usize, reason: String },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("unknown identifier: {0}")]
    Unknown(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, FarfError>;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum FarfError {
    /// An instance or raw value does not conform to its schema.
    #[error("schema violation: {0}")]
    Schema(String),

    /// A function argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A statistic was requested from an empty accumulator.
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    /// A configuration value violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A data row could not be ingested.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FarfError {
    pub fn schema(msg: impl Into<String>) -> Self {
        FarfError::Schema(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        FarfError::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        FarfError::Config(msg.into())
    }

    pub fn row(row: usize, message: impl Into<String>) -> Self {
        FarfError::Row {
            row,
            message: message.into(),
        }
    }
}

//! Crate-wide error type.

/// Error type shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    /// An input violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// A trainable-only operation was called on the analytic oracle variant.
    #[error("operation requires a trainable model, got the analytic oracle variant")]
    NotTrainable,
    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),
    /// Checkpoint or report I/O failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Checkpoint container could not be decoded.
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }
}

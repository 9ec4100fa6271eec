use thiserror::Error;

/// Errors reported by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched or otherwise unusable dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A vector claimed to be on the probability simplex is not.
    #[error("not a probability vector: {0}")]
    Simplex(String),

    /// The optimizer ran into a non-finite cost or gradient.
    #[error("non-finite value encountered during optimization at iteration {iteration}")]
    NonFinite { iteration: u64 },

    /// A malformed or truncated data file.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

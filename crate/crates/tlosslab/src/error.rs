//! Crate-wide error type.

/// Alias for results produced by this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument was outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two containers that must agree in shape did not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation that needs at least one element received none.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A configuration value failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// Training produced a non-finite loss and stopped.
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} \
         (weight norm {weight_norm:.6e}, nu_tilde {nu_tilde:.6e})"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        weight_norm: f64,
        nu_tilde: f64,
    },

    /// A file could not be read or written.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file had the right bytes but the wrong contents.
    #[error("format error: {0}")]
    Format(String),

    /// JSON (de)serialization failed.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

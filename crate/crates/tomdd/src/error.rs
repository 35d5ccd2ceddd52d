//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant. The message names the
    /// offending key.
    #[error("invalid config: {0}")]
    Config(String),

    /// Tensor or mask dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A dataset, manifest or checkpoint is malformed.
    #[error("bad data: {0}")]
    Data(String),

    /// Training produced a non-finite objective.
    #[error("non-finite {objective} at step {step}")]
    NonFinite { step: u64, objective: String },

    /// A sweep cell failed; carries the grid position.
    #[error("sweep cell (alpha={alpha}, gamma={gamma}) failed: {source}")]
    SweepCell {
        alpha: f64,
        gamma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit status for the CLI: 1 for validation problems, 2 for runtime
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) => 1,
            _ => 2,
        }
    }
}

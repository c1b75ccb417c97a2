//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// A segmentation mask selected no valid depth pixels.
    #[error("object has no valid points")]
    EmptyObject,

    /// Inputs whose shapes must agree did not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    /// A mesh or manifold failed a structural invariant.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// Camera intrinsics violated an invariant.
    #[error("invalid camera intrinsics: {0}")]
    InvalidCamera(String),

    /// A text file failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A configuration value was missing, unknown, or malformed.
    #[error("config error: {0}")]
    Config(String),

    /// A checkpoint file did not match its shape manifest.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

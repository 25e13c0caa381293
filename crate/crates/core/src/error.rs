//! Error type shared across the workspace.

use thiserror::Error;

/// Errors produced by image handling, feature extraction, matching and
/// the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A window reaches outside its host image.
    #[error("window out of bounds: {0}")]
    Bounds(String),

    /// An input is too small or empty for the requested operation.
    #[error("size error: {0}")]
    Size(String),

    /// Mismatched feature dimensions or an unsupported channel layout.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A window is not aligned to the patch grid.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// An invalid configuration or generator parameter.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// No candidate window fits the target.
    #[error("no candidate window fits: {0}")]
    EmptyResult(String),

    /// Too many benchmark pairs failed to load.
    #[error("benchmark run failed: {0}")]
    Run(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared across the simulation crate.

use thiserror::Error;

/// Errors produced while building networks, running scenarios, or reading
/// and writing trace files.
#[derive(Debug, Error)]
pub enum Error {
    /// Lane counts outside the supported 1..=3 range.
    #[error("unsupported lane count {0}: expected 1, 2, or 3 lanes per approach")]
    BadLaneCount(usize),

    /// A configuration value that fails validation.
    #[error("invalid scenario configuration: {0}")]
    BadConfig(String),

    /// A trace file whose structure does not match the expected schema.
    #[error("malformed trace: {0}")]
    BadTrace(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON encoding or decoding failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

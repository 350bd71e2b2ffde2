//! Error type shared by the core library.

use thiserror::Error;

/// Errors raised by model construction, rollouts, training, and file IO.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A matrix or vector did not have the shape an operation requires.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// A scalar argument fell outside its documented range.
    #[error("{context}: value {value} outside valid range {range}")]
    OutOfRange {
        context: &'static str,
        value: f64,
        range: &'static str,
    },

    /// A tensor contained NaN or infinite entries where finite values are required.
    #[error("non-finite values encountered in {0}")]
    NonFinite(&'static str),

    /// Training diverged (non-finite loss or parameters).
    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Diverged {
        epoch: usize,
        step: usize,
        detail: String,
    },

    /// The contraction factor is >= 1, so no ultimate error bound exists.
    #[error("contraction factor {rho} >= 1: no ultimate bound can be certified")]
    NoBound { rho: f64 },

    /// Not enough data to perform the requested operation.
    #[error("insufficient data for {context}: need {need}, have {have}")]
    InsufficientData {
        context: &'static str,
        need: usize,
        have: usize,
    },

    /// A serialized checkpoint or dataset file is malformed.
    #[error("malformed {kind} file: {detail}")]
    MalformedFile { kind: &'static str, detail: String },

    /// Underlying IO failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;

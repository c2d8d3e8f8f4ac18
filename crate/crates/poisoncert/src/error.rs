//! Crate-wide error type.

use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A bounded search or enumeration would exceed its configured cap.
    /// Nothing is silently truncated; the caller must raise the cap or
    /// shrink the problem.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    /// An ensemble ended up with zero trainable partitions.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// A robustness profile never reaches risk 1 below its budget cap, so
    /// the risk-to-robustness summation is undefined.
    #[error("profile not saturated: {0}")]
    NotSaturated(String),

    /// Malformed IDX binary input, with the byte offset of the defect.
    #[error("idx format error at byte {offset}: {msg}")]
    IdxFormat { offset: u64, msg: String },

    /// Malformed dataset CSV, with the 1-based line of the defect.
    #[error("csv format error at line {line}: {msg}")]
    CsvFormat { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-parseable code, used by the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "E_INVALID_INPUT",
            Error::CapacityExceeded(_) => "E_CAPACITY",
            Error::DegenerateModel(_) => "E_DEGENERATE",
            Error::NotSaturated(_) => "E_NOT_SATURATED",
            Error::IdxFormat { .. } => "E_IDX_FORMAT",
            Error::CsvFormat { .. } => "E_CSV_FORMAT",
            Error::Io(_) => "E_IO",
            Error::Json(_) => "E_JSON",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

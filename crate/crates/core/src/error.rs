use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("harmonic {order}: {reason}")]
    PeakSearch { order: usize, reason: String },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("estimation failed for {failed} of {total} signals (limit {limit})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: usize,
    },

    #[error("threshold table was built under config {table}, current config is {current}")]
    DigestMismatch { table: String, current: String },

    #[error("threshold table has no entries for segment length {0} s")]
    MissingSegmentLength(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("response column '{0}' not found in header")]
    MissingResponseColumn(String),

    #[error("row {row}, column '{column}': cannot use value '{value}' (cells must be finite numbers)")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("split produced an empty partition (n = {n}, fractions = {fractions:?})")]
    EmptyPartition { n: usize, fractions: [f64; 3] },

    #[error("training loss became non-finite at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },

    #[error("model file {path}: {reason}")]
    ModelFormat { path: PathBuf, reason: String },

    #[error("calibration mismatch: this interval needs '{expected}' scores, got '{got}'")]
    CalibrationMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("unknown method '{0}' (expected one of: naive, qr, cqr, icqr)")]
    UnknownMethod(String),

    #[error("unknown synthetic generator '{0}' (expected one of: linear, two-group, four-group)")]
    UnknownSynthetic(String),

    #[error("config file {path}, line {line}: {reason}")]
    ConfigFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

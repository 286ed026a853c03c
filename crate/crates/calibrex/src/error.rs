//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by validation, estimation, and benchmark operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("label {label} out of range for {n_classes} classes (sample {sample})")]
    LabelOutOfRange {
        sample: usize,
        label: usize,
        n_classes: usize,
    },

    #[error("score row {row} sums to {sum}, outside tolerance of 1")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("non-finite score at row {row}, column {col}")]
    NonFiniteScore { row: usize, col: usize },

    #[error("score {value} at index {index} outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class-wise setting cannot be reduced to a single event stream; iterate class_specific(c) and aggregate")]
    ClassWiseNotReducible,

    #[error("cannot aggregate estimates with mixed estimator ids: {0} vs {1}")]
    MixedEstimators(String, String),

    #[error("training data error: {0}")]
    Training(String),

    #[error("benchmark config error: {0}")]
    Config(String),

    #[error("csv parse error: {0}")]
    CsvFormat(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

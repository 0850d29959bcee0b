//! Error type shared across the crate.

use thiserror::Error;

/// Convenience alias used by every fallible function in this crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A column named by the schema is absent from the CSV header.
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    /// A cell could not be interpreted. `row` is the 1-based data-row index
    /// (the header row is not counted).
    #[error("row {row}: {message}")]
    InvalidValue { row: usize, message: String },

    /// The corpus has a header but no data rows, or no rows at all.
    #[error("corpus contains no data rows")]
    EmptyCorpus,

    /// Stanza segmentation could not be completed. `rows` lists the 1-based
    /// data-row indexes that caused the failure.
    #[error("segmentation failed: {message} (rows {rows:?})")]
    Segmentation { rows: Vec<usize>, message: String },

    /// A code id that does not occur in the codebook.
    #[error("unknown code id `{0}`")]
    UnknownCode(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The model cannot be fit (e.g. all inputs identical, nothing to project).
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// A statistic whose defining formula divides by zero for this input.
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Input bytes or layout do not match the expected file format.
    #[error("malformed or unsupported input: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

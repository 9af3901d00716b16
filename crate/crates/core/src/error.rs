use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the analysis routines and their file front-ends.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input is empty: {0}")]
    EmptyInput(String),

    #[error("column with a single level: `{column}` only has `{level}`")]
    SingleLevel { column: String, level: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("empty category: variable {variable} category {category} has no observations")]
    EmptyCategory { variable: usize, category: usize },

    #[error("index {index} out of range (must be < {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("cross tabulation needs two distinct variables, got {0} twice")]
    SameVariable(usize),

    #[error("rank {rank} out of range (maximum {max})")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("zero {axis} margin at index {index}")]
    ZeroMargin { axis: &'static str, index: usize },

    #[error("negative count {value} at row {row}, column {column}")]
    NegativeCount { row: usize, column: usize, value: f64 },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("category layout mismatch")]
    LayoutMismatch,

    #[error("scores are constant; correlation ratio undefined")]
    ConstantScores,

    #[error("malformed input at row {row}, column {column}: {message}")]
    Malformed {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

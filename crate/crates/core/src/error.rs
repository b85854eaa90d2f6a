use thiserror::Error;

/// Failures surfaced by matrix validation, the estimators and the file layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative count {value} at row {row}, column {col}")]
    NegativeCount { row: usize, col: usize, value: i64 },
    #[error("readout label {readout:?} at position {index} does not match state label {state:?}")]
    LabelMismatch {
        index: usize,
        state: String,
        readout: String,
    },
    #[error("control row has no subjects")]
    EmptyControlRow,
    #[error("no cases in the case block")]
    EmptyCaseBlock,
    #[error("stratum {stratum:?} has no cases of state {state:?}")]
    EmptyStratum { stratum: String, state: String },
    #[error("malformed table: {0}")]
    Shape(String),
    #[error("value outside its domain: {0}")]
    Domain(String),
    #[error("zero denominator while computing {0}")]
    ZeroDenominator(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid incidence specification: {0}")]
    InvalidIncidence(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for failures caused by the contents of the inputs rather than by
    /// the filesystem.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

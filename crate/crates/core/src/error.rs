use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("click ({row}, {col}) lies outside a {height}x{width} image")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("pixel ({row}, {col}) carries both a positive and a negative click")]
    ConflictingClicks { row: usize, col: usize },
    #[error("malformed run-length encoding: {0}")]
    MalformedEncoding(String),
    #[error("prediction matches the ground truth; no pixel left to click")]
    NoMisclassifiedPixels,
    #[error("forward cache does not belong to the current decoder weights")]
    StaleCache,
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("no snapshot to restore")]
    NoSnapshot,
    #[error("unknown decoder `{0}`")]
    UnknownName(String),
    #[error("decoder `{0}` already exists")]
    NameCollision(String),
    #[error("label mask has no labeled pixel")]
    EmptyLabel,
    #[error("records were produced with different budgets or thresholds")]
    MixedBudgets,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("ground-truth mask of `{0}` is empty")]
    EmptyGroundTruth(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("cannot decode {}: {message}", .path.display())]
    Decode { path: PathBuf, message: String },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::DimensionMismatch { expected, actual }
    }
}

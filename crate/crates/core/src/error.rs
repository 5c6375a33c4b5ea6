use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the ranking pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {0} appears more than once in the permutation")]
    DuplicateIndex(usize),
    #[error("index {index} is out of range for a permutation of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length {0} is too short, at least 2 elements are required")]
    TooShort(usize),
    #[error("subsequence length {lambda} is outside 2..={len}")]
    LambdaOutOfRange { lambda: usize, len: usize },
    #[error("non-finite entry at position {0}")]
    NonFiniteEntry(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("sequence {id} has {len} items, shorter than subsequence length {lambda}")]
    SequenceTooShort {
        id: String,
        len: usize,
        lambda: usize,
    },
    #[error("sequence {0} has no ground-truth order")]
    MissingGroundTruth(String),
    #[error("subsequence length {0} is too small, at least 2 is required")]
    LambdaTooSmall(usize),
    #[error("training data contains a single class")]
    DegenerateData,
    #[error("training produced a non-finite loss")]
    NonFiniteLoss,
    #[error("the subsequence length range is empty")]
    EmptyLambdaRange,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ranker length {lambda} exceeds sequence length {len}")]
    LambdaExceedsLength { lambda: usize, len: usize },
    #[error("exhaustive search is limited to 9 elements, got {0}")]
    SequenceTooLongForExhaustive(usize),
    #[error("no pairwise (length 2) ranker available for initialization")]
    MissingPairRanker,

    #[error("no rankings to fuse")]
    EmptyRankings,
    #[error("ensemble has no ranker of length {0}")]
    UnknownLambda(usize),

    #[error("cannot draw {requested} items, only {available} available")]
    InsufficientItems { requested: usize, available: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invariant violated in sequence {sequence}: {reason}")]
    InvariantViolation { sequence: String, reason: String },
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

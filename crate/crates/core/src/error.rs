use std::path::PathBuf;

use thiserror::Error;

use crate::data::ViewId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic {found:?}, expected \"EMB1\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{path}: truncated embedding file, expected {expected} bytes of payload, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: {extra} trailing bytes after the last row")]
    TrailingBytes { path: PathBuf, extra: u64 },

    #[error("{view} view has {found} rows but metadata lists {expected} instances")]
    RowCountMismatch {
        view: ViewId,
        expected: usize,
        found: usize,
    },

    #[error("{view} view row {row}, column {col} is not finite")]
    NonFinite { view: ViewId, row: usize, col: usize },

    #[error("metadata row {row}: duplicate id {id:?}")]
    DuplicateId { row: usize, id: String },

    #[error("metadata row {row}: instance marked known but has no label")]
    KnownWithoutLabel { row: usize },

    #[error("metadata row {row}: instance has label {label:?} but is not marked known")]
    LabelWithoutKnown { row: usize, label: String },

    #[error("metadata row {row}: label {label:?} is not a known type")]
    UnknownLabel { row: usize, label: String },

    #[error("{path}, line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid label space: {0}")]
    LabelSpace(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("k-means needs at least k points: got {points} points for k = {k}")]
    TooFewPoints { points: usize, k: usize },

    #[error("class index {index} is outside the known range 0..{known}")]
    ClassOutOfRange { index: usize, known: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadMagic { .. } => "bad_magic",
            Error::Truncated { .. } => "truncated",
            Error::TrailingBytes { .. } => "trailing_bytes",
            Error::RowCountMismatch { .. } => "row_count_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::KnownWithoutLabel { .. } => "known_without_label",
            Error::LabelWithoutKnown { .. } => "label_without_known",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::Json { .. } => "json",
            Error::LabelSpace(_) => "label_space",
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::ClassOutOfRange { .. } => "class_out_of_range",
            Error::Empty(_) => "empty",
            Error::Checkpoint(_) => "checkpoint",
        }
    }
}

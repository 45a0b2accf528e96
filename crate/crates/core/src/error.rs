use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite value at row {row}, dim {dim}")]
    NonFinite { row: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("alpha must be >= 1 (got {0})")]
    AlphaTooSmall(f64),

    #[error("separation condition unsatisfied: (d*/m)*delta_f = {lhs} <= 2*D_v = {rhs}")]
    SeparationUnsatisfied { lhs: f64, rhs: f64 },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("missing value for attribute `{0}`")]
    MissingAttribute(String),

    #[error("unknown category `{value}` for attribute `{attribute}`")]
    UnknownCategory { attribute: String, value: String },

    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),

    #[error("duplicate id {0}")]
    DuplicateId(u32),

    #[error("unknown id {0}")]
    UnknownId(u32),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("bad magic: expected \"FCVI\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0} (expected 1)")]
    UnsupportedVersion(u32),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("truncated {0}")]
    Truncated(String),

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

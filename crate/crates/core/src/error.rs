use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("input of length {len} does not fit in {slots} slots")]
    InputTooLong { len: usize, slots: usize },

    #[error("slot count mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A rescaling operation was requested on a ciphertext with no level left.
    #[error("multiplicative depth exhausted during {op} (level {level})")]
    DepthExhausted { op: &'static str, level: u32 },

    #[error("matrix of {rows}x{cols} does not fit the {layout} layout with {slots} slots")]
    MatrixTooLarge {
        rows: usize,
        cols: usize,
        layout: &'static str,
        slots: usize,
    },

    #[error("operation {op} requires {expected} layout, got {found}")]
    WrongLayout {
        op: &'static str,
        expected: &'static str,
        found: &'static str,
    },

    #[error("index ({row}, {col}) out of range for {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tile shape mismatch: {0}")]
    TileShapeMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("least-squares system is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unexpected dataset shape: {0}")]
    Shape(String),

    #[error("bad IDX magic number in {path}: {found:#010x} (expected {expected:#010x})")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("record count mismatch: {0}")]
    CountMismatch(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("invalid training configuration: {0}")]
    InvalidTraining(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

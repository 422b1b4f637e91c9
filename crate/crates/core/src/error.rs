use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: file is empty")]
    EmptyFile { path: PathBuf },

    #[error("row {row}: expected {expected} columns, found {found}")]
    MalformedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    NonNumericCell {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("dataset must contain at least two classes, found {found}")]
    SingleClass { found: usize },

    #[error("label column {0:?} not found in header")]
    UnknownLabelColumn(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("class {class:?} has {count} samples, fewer than the {folds} folds requested")]
    ClassTooSmall {
        class: String,
        count: usize,
        folds: usize,
    },

    #[error("gene mask selects no genes")]
    EmptyMask,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("gene set must not be empty")]
    EmptySet,

    #[error("m = {m} must lie in [1, {n_genes}]")]
    BadM { m: usize, n_genes: usize },

    #[error("velocity component is not finite: {0}")]
    NonFiniteVelocity(f64),

    #[error("crossover needs strings of length >= 2, got {0}")]
    TooShort(usize),

    #[error("bad shape: {0}")]
    BadShape(String),

    #[error("inconsistent ranks: average ranks sum to {sum}, expected k(k+1)/2 = {expected}")]
    InconsistentRanks { sum: f64, expected: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

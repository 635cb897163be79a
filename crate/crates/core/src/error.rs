use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("non-finite value at row {row}, column {column:?}")]
    NonFinite { row: usize, column: String },
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("invalid label {value:?} at row {row} (expected 0 or 1)")]
    InvalidLabel { row: usize, value: String },
    #[error("duplicate feature name {0:?}")]
    DuplicateFeature(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("need at least one outlier and one inlier")]
    SingleClass,
    #[error("class {class} has {count} members, need at least {needed}")]
    ClassTooSmall { class: u8, count: usize, needed: usize },
    #[error("bags need {needed} inliers but only {available} exist")]
    NotEnoughInliers { needed: usize, available: usize },
    #[error("empty matrix")]
    Empty,
    #[error("row {row} out of range for {n} rows")]
    RowOutOfRange { row: usize, n: usize },
    #[error("{family} with k={k} needs more than {needed} rows, got {n}")]
    TooFewRows {
        family: &'static str,
        k: usize,
        n: usize,
        needed: usize,
    },
    #[error("invalid scoring spec {spec}: {reason}")]
    InvalidSpec { spec: String, reason: String },
    #[error("scoring function {spec} failed: {source}")]
    Osf {
        spec: String,
        #[source]
        source: Box<Error>,
    },
    #[error("gamma {gamma} exceeds the {available} selectable columns")]
    GammaTooLarge { gamma: usize, available: usize },
    #[error("column {column} has a non-positive cost {cost}")]
    InvalidCost { column: usize, cost: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("input is missing model columns: {}", .0.join(", "))]
    SchemaMismatch(Vec<String>),
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Json(_) => false,
            Error::Osf { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}

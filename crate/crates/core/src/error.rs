use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema references unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("column `{column}`, row {row}: token `{token}` is not a declared level")]
    UndeclaredLevel {
        column: String,
        row: usize,
        token: String,
    },

    #[error("column `{column}`, row {row}: cannot parse `{token}` as a number")]
    NotNumeric {
        column: String,
        row: usize,
        token: String,
    },

    #[error("column `{0}` is constant over its observed entries")]
    ConstantColumn(String),

    #[error("column `{0}` has no observed entries")]
    EmptyColumn(String),

    #[error("column `{column}` has kind {actual}, expected {expected}")]
    WrongKind {
        column: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("matrix must not contain missing values")]
    MissingValues,

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("graph is not a tree: {0}")]
    NotATree(String),

    #[error("graph has no edges")]
    NoEdges,

    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),

    #[error("unknown cause `{0}`")]
    UnknownCause(String),

    #[error("class `{0}` does not occur in the labels")]
    ClassAbsent(String),

    #[error("covariates are collinear: {0}")]
    Collinear(String),

    #[error("missing upstream artifact {artifact}: run `clintraj {stage}` first")]
    MissingArtifact { artifact: String, stage: &'static str },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error was caused by the caller's input rather than a
    /// numerical or internal failure.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Singular(_))
    }
}

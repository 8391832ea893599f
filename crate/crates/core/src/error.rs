use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing configured column `{0}` in header")]
    MissingColumn(String),

    #[error("zero usable rows ({dropped} dropped)")]
    NoUsableRows { dropped: usize },

    #[error("unknown action label `{0}`")]
    UnknownAction(String),

    #[error("sample size {requested} exceeds {available} available records")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("feature columns do not match the model: expected {expected}, got {got}")]
    ColumnMismatch { expected: usize, got: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("missing results for family {0}")]
    MissingFamily(String),

    #[error("candidate {candidate}: {source}")]
    Candidate {
        candidate: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

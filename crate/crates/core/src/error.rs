use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("target column {0} not found")]
    MissingTarget(String),
    #[error("row {row}, column {column}: missing value (use median imputation to accept it)")]
    MissingValue { row: usize, column: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        found: usize,
        expected: usize,
    },
    #[error("classification target at row {row} is {value}, expected 0 or 1")]
    NonBinaryTarget { row: usize, value: f64 },
    #[error("non-finite derivative at iteration {iteration}, row {row}")]
    NonFiniteDerivative { iteration: usize, row: usize },
    #[error("feature dimension mismatch: model expects {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("model parse error at line {line}, column {column} (byte offset {offset}): {message}")]
    ModelParse {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("unsupported model version {found} (this reader supports version {supported})")]
    UnsupportedVersion { found: String, supported: u32 },
    #[error("metric {0} is undefined: labels contain a single class")]
    SingleClass(&'static str),
    #[error("metric {metric} is not applicable: {reason}")]
    MetricNotApplicable { metric: String, reason: String },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("leaf {0} has zero hessian sum")]
    ZeroHessianLeaf(usize),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

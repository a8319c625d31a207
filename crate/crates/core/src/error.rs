use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("non-binary value `{value}` in binary column `{column}` at line {line}")]
    NonBinaryValue {
        column: String,
        line: usize,
        value: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("missing genotype value at position {0}; filter incomplete rows first")]
    MissingGenotype(usize),

    #[error("genotype value {value} at position {index} is not in {{0, 1, 2}}")]
    InvalidGenotype { index: usize, value: u8 },

    #[error("split part {0} would be empty")]
    EmptyPart(usize),

    #[error("class {class} has {count} samples but {parts} parts were requested")]
    ClassTooSmall {
        class: u8,
        count: usize,
        parts: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("leaf references covariate {index} but only {p} covariates exist")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("no applicable target for move {0}")]
    NoApplicableMove(&'static str),

    #[error("rank-deficient design: column `{column}` is collinear with {with:?}")]
    RankDeficient { column: String, with: Vec<String> },

    #[error("column `{0}` is identically zero")]
    ZeroColumn(String),

    #[error("only one class present in the labels")]
    SingleClass,

    #[error("gate is degenerate: {correct} correct and {incorrect} incorrect training predictions")]
    GateDegenerate { correct: usize, incorrect: usize },

    #[error("sample mismatch: {0}")]
    SampleMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

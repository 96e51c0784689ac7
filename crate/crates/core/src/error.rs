use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("feature `{feature}` is {actual}, clause requires {expected}")]
    KindMismatch {
        feature: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("predicate algebra error: {0}")]
    Algebra(String),

    #[error("score import error at row {row}: {message}")]
    Import { row: usize, message: String },

    #[error("score vector has {actual} entries, dataset has {expected} rows")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("influence is undefined: {0}")]
    UndefinedInfluence(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("quadrature did not converge (residual estimate {residual:e})")]
    Numerical { residual: f64 },

    #[error("no candidate predicate selects any rows")]
    NoExplanation,

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

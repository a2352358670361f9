//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("negative value in {context}: {value}")]
    NegativeValue { context: String, value: f64 },

    #[error("numerical blowup at t = {time} days: {detail}")]
    NumericalBlowup { time: f64, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate distance between patches '{a}' and '{b}'")]
    DegenerateDistance { a: String, b: String },

    #[error("non-finite gravity weight for pair ('{a}', '{b}')")]
    WeightOverflow { a: String, b: String },

    #[error("coordinate out of range: {0}")]
    CoordinateRange(String),

    #[error("unknown patch id '{0}'")]
    UnknownPatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("unknown region class '{0}'")]
    RegionClass(String),

    #[error("duplicate province id '{0}'")]
    DuplicateProvince(String),

    #[error("province '{0}' has case data but belongs to no patch")]
    UnmappedProvince(String),

    #[error("window out of range: {0}")]
    WindowBounds(String),

    #[error("ill-conditioned regression: {0}")]
    IllConditioned(String),

    #[error("all {attempted} fit iterations failed; first failure: {first_failure}")]
    AllIterationsFailed {
        attempted: usize,
        first_failure: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },

    #[error("reference tensor has zero Frobenius norm")]
    ZeroNorm,

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid factor model: {0}")]
    InvalidModel(String),

    #[error("year {year} outside tensor range {first}..={last}")]
    YearOutOfRange { year: i32, first: i32, last: i32 },

    #[error("series too short: need at least {needed} observations, have {available}")]
    SeriesTooShort { needed: usize, available: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("ARIMA optimizer did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset error at row {row}: {message}")]
    Dataset { row: usize, message: String },

    #[error("incomplete grid: missing (utility={utility}, industry={industry}, year={year})")]
    IncompleteGrid {
        utility: String,
        industry: String,
        year: i32,
    },

    #[error("dataset error: {0}")]
    DatasetFormat(String),

    #[error("no chromosome produced a finite fitness")]
    NoViableChromosome,
}

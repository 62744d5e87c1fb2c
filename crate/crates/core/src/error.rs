use thiserror::Error;

/// Errors raised by the rerandomization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("need at least {min} units, got {got}")]
    TooFewUnits { min: usize, got: usize },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{0} group is empty")]
    EmptyGroup(&'static str),

    #[error("odd unit count {0} requires near-equal splitting")]
    OddUnits(usize),

    #[error("all singular values are zero")]
    ZeroMatrix,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("component count {k} outside 1..={rank}")]
    ComponentOutOfRange { k: usize, rank: usize },

    #[error("singular covariance with zero ridge penalty")]
    SingularRidge,

    #[error("criterion has no threshold for scheme {0}")]
    Uncalibrated(String),

    #[error("unbalanced design: {0}")]
    Unbalanced(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid feature spec: {0}")]
    InvalidSpec(String),
    /// `dim` is 1-based.
    #[error("M_{dim} = {m} is not a power of Q = {q}")]
    NotAPower { dim: usize, m: usize, q: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dense size {size} exceeds cap {cap}")]
    CapExceeded { size: u128, cap: usize },
    #[error("input {value} in column {column} is outside the polynomial domain [-1, 1]")]
    OutOfDomain { column: usize, value: f64 },
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed weight container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSpec(_)
            | Error::NotAPower { .. }
            | Error::InvalidConfig(_)
            | Error::Toml(_) => ErrorClass::Config,
            Error::Numerical(_) => ErrorClass::Numerical,
            Error::DimensionMismatch { .. }
            | Error::ShapeMismatch(_)
            | Error::CapExceeded { .. }
            | Error::OutOfDomain { .. }
            | Error::Data(_)
            | Error::Parse { .. }
            | Error::Format(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
        }
    }
}

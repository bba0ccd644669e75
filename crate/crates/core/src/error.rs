use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate settling-time bound: {0}")]
    DegenerateBound(String),

    #[error("numeric oracle did not reach the target level within {horizon} s")]
    Timeout { horizon: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cost matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("too many constraints for enumeration: {m} > {max}")]
    TooManyConstraints { m: usize, max: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("time budget unavailable: {0}")]
    Budget(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation failed for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Precondition(_) => "precondition",
            Error::DegenerateBound(_) => "degenerate_bound",
            Error::Timeout { .. } => "timeout",
            Error::Dimension(_) => "dimension",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::TooManyConstraints { .. } => "too_many_constraints",
            Error::Geometry(_) => "geometry",
            Error::Budget(_) => "budget",
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

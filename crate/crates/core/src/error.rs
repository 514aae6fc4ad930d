use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EbmError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {context} at coordinate {index}")]
    NonFinite { context: String, index: usize },

    #[error("Langevin chain diverged at step {step}")]
    ChainDivergence { step: usize },

    #[error("finite-difference gradient refused: {param_count} parameters exceeds the limit of {limit}; use an analytic gradient")]
    ParamLimit { param_count: usize, limit: usize },

    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl EbmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        EbmError::InvalidArgument(msg.into())
    }

    pub(crate) fn config(line: Option<usize>, msg: impl Into<String>) -> Self {
        EbmError::Config { line, message: msg.into() }
    }
}

impl From<std::io::Error> for EbmError {
    fn from(e: std::io::Error) -> Self {
        EbmError::Io(e.to_string())
    }
}

impl From<csv::Error> for EbmError {
    fn from(e: csv::Error) -> Self {
        EbmError::Io(e.to_string())
    }
}

pub type Result<T, E = EbmError> = std::result::Result<T, E>;

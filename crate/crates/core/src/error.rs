use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step index must be >= 1")]
    ZeroStep,

    #[error("lower rate bound {lo} exceeds upper bound {hi}")]
    InvertedBounds { lo: f64, hi: f64 },

    #[error("point {value} at coordinate {coord} lies outside the feasible box [{lo}, {hi}]")]
    OutsideBox { coord: usize, value: f64, lo: f64, hi: f64 },

    #[error("non-finite gradient at coordinate {coord}: {value}")]
    NonFiniteGradient { coord: usize, value: f64 },

    #[error("non-finite loss {value} at step {t}")]
    NonFiniteLoss { t: u64, value: f64 },

    #[error("learning rates requested before the first step")]
    NoStepTaken,

    #[error("length mismatch: {losses} losses against a baseline over {horizon} steps")]
    HorizonMismatch { losses: usize, horizon: u64 },

    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

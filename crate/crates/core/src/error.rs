use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Time or parameter outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} outside [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("input is not mean-zero (constant coefficient {0:e})")]
    NotMeanZero(f64),

    #[error("singular implicit system at step {step}: 1 - dt*d = {pivot:e}")]
    SingularStep { step: usize, pivot: f64 },

    #[error("explicit step unstable: dt*|d|max = {bound:.3} >= 0.5 at t = {t}")]
    Unstable { t: f64, bound: f64 },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("undefined state: {0}")]
    UndefinedState(String),
    #[error("inapplicable: {0}")]
    Inapplicable(String),
    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    SpectralGapTooSmall { iterations: usize, estimate: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

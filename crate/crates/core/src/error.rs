use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("DDPM covariance not positive (min entry {min}); reduce step size")]
    NonPositiveVariance { min: f64 },
    #[error("level density does not provide `{0}`")]
    MissingOracle(&'static str),
    #[error("non-finite log density")]
    NonFinite,
    #[error("all log-weights are -inf")]
    DegenerateWeights,
    #[error("empty input")]
    Empty,
    #[error("{0}")]
    InvalidCombination(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

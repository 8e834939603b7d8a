use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step size underflow at t = {t} µs (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("integrator exceeded {steps} steps before reaching t = {t} µs")]
    TooManySteps { t: f64, steps: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("records are sampled on different time grids")]
    GridMismatch,
    #[error("record is not normalized: {0}")]
    Unnormalized(String),
    #[error("invalid coincidence window T = {0}")]
    InvalidWindow(f64),
    #[error("distinguishable coincidence probability is zero")]
    ZeroCoincidence,
    #[error("optimizer did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

impl Error {
    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidGrid(_)
                | Error::UnknownPreset(_)
                | Error::InvalidWindow(_)
                | Error::DimensionMismatch { .. }
                | Error::GridMismatch
        )
    }
}

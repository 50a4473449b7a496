use thiserror::Error;

/// Errors raised by geometry, solvers and robust estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("acceleration parameter k = {0} outside the admissible domain k > -2")]
    ParameterDomain(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in input")]
    NonFinite,

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("not enough correspondences: need {needed}, got {got}")]
    TooFewCorrespondences { needed: usize, got: usize },

    #[error("acceleration is unobservable when the readout ratio is zero; use a global-shutter solver")]
    UnobservableAcceleration,

    #[error("no admissible real root of the determinant polynomial in k range [{lo}, {hi}]")]
    NoSolution { lo: f64, hi: f64 },

    #[error("robust estimation failed: {0}")]
    EstimationFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

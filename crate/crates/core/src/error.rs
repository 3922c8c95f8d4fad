use thiserror::Error;

/// Errors raised by the estimation, bootstrap and benchmarking layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Every kernel weight at the evaluation point vanished.
    #[error("all kernel weights vanish at x = {x}")]
    ZeroDenominator { x: f64 },

    #[error("sample is empty")]
    EmptySample,

    #[error("sample too short: need at least {required} observations, got {actual}")]
    SampleTooShort { required: usize, actual: usize },

    #[error("degenerate sample: predictors have zero variance")]
    DegenerateSample,

    #[error("residual distribution is empty")]
    EmptyDistribution,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the kernel, SoS, solver and bound routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KsosError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("Gram matrix is numerically singular (smallest pivot {min_pivot:.3e} after jitter {jitter:.1e})")]
    SingularGram { min_pivot: f64, jitter: f64 },

    #[error("negative interpolation target y[{index}] = {value:.3e}")]
    NegativeTarget { index: usize, value: f64 },

    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("point {0:?} is not on the boundary of the unit square")]
    NotOnBoundary(Vec<f64>),

    #[error("sample count {0} must be a positive multiple of 4")]
    InvalidSampleCount(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T> = std::result::Result<T, KsosError>;

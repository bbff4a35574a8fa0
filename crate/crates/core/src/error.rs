use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid current state: {0}")]
    InvalidState(String),
    #[error("divergent series: nome q = {0} outside [0,1)")]
    DivergentSeries(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no drift detected: fitted gamma {0} >= 1")]
    NoDrift(f64),
    #[error("no contraction certified: {0}")]
    NoContraction(String),
    #[error("radius below 2K/(gamma_bar-gamma): R = {r}, need R > {min}")]
    RadiusTooSmall { r: f64, min: f64 },
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("incompatible randomness decomposition: {0}")]
    IncompatibleKernels(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("reducible chain: {0}")]
    Reducible(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("cache error: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

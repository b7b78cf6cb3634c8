use thiserror::Error;

/// Errors raised by configuration checks, operator evaluations and the
/// iteration loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("tau = {tau} must exceed (1+eta)/(1-eta) = {bound}")]
    TauTooSmall { tau: f64, bound: f64 },
    #[error("eta = {0} must lie in [0, 1)")]
    EtaOutOfRange(f64),
    #[error("relaxation schedule bounds [{lower}, {upper}] must satisfy 0 < a <= b < 2")]
    ThetaOutOfRange { lower: f64, upper: f64 },
    #[error("lambda_max = {lambda_max} must exceed (1-eta)/C^2 = {bound}")]
    LambdaMaxTooSmall { lambda_max: f64, bound: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector contains a non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("point lies outside the domain ball: distance {distance} > radius {radius}")]
    OutsideDomainBall { distance: f64, radius: f64 },
    #[error("step {k} left the domain ball: distance {distance} > radius {radius}")]
    NewIterateLeftBall { k: usize, distance: f64, radius: f64 },
    #[error("index {index} out of range for {len} equations")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("linear solve failed: {0}")]
    SolveFailed(String),
    #[error("coefficient {value} at node {node} outside admissible range [{lower}, {upper}]")]
    GammaOutOfBounds {
        node: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("line-search direction is degenerate at step {k}")]
    DegenerateDirection { k: usize },
    #[error("no sample pair had a nonzero forward difference")]
    NoValidPairs,
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("width b_{index} = {value} is not strictly positive")]
    NonPositiveWidth { index: usize, value: f64 },

    #[error("pinning ratio x_{index} = {value} lies outside the open unit interval")]
    RatioOutOfRange { index: usize, value: f64 },

    #[error("schedule needs at least 3 widths (N >= 2), got {len}")]
    TruncationTooShort { len: usize },

    #[error("pinning radius {0} is not strictly positive")]
    NonPositiveRadius(f64),

    #[error("quadrature reached error estimate {achieved:e}, requested {requested:e}")]
    QuadratureFailure { achieved: f64, requested: f64 },

    #[error("pinning ball does not fit at region {index}: t_(n-1) - 2L_n = {gap}")]
    PinningViolation { index: usize, gap: f64 },

    #[error("geometric ratio l = {0} must exceed 1")]
    RatioNotAboveOne(f64),

    #[error("operation not defined for this model: {0}")]
    UnsupportedModel(&'static str),

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("no start converged below tolerance {tol:e} ({starts} starts)")]
    NoConvergence { starts: usize, tol: f64 },

    #[error("candidate outside the feasible domain: {0}")]
    DomainViolation(String),

    #[error("tail not monotone at n = {index}: F_n = {current}, F_(n+1) = {next}")]
    TailViolation { index: usize, current: f64, next: f64 },

    #[error("optimum carries no valid tail certificate")]
    UncertifiedTail,

    #[error("horizon {horizon} is not a positive integer multiple of step {dt}")]
    StepGridInvalid { horizon: f64, dt: f64 },

    #[error("paths do not share a time grid")]
    GridMismatch,

    #[error("estimated cost {cost:e} kernel evaluations exceeds guard {limit:e}")]
    CostGuardExceeded { cost: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

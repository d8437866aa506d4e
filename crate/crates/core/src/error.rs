use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {x} lies outside the domain ({lo}, {hi})")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("jet of order {have} is too short for Γ_{n} (needs order {need})")]
    InsufficientJetOrder { n: usize, have: usize, need: usize },

    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}] (error estimate {estimate:e})")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    #[error("spectral tail {tail:e} exceeds tolerance at t = {t}; truncation N >= {required} needed")]
    Truncation { t: f64, tail: f64, required: usize },

    #[error("finite-difference mass drift {drift:e} exceeds 1e-6 at t = {t}")]
    MassDrift { t: f64, drift: f64 },

    #[error("tridiagonal solve broke down at row {row}")]
    LinearSolve { row: usize },

    #[error("semigroup value underflowed at t = {t}, x = {x}")]
    Underflow { t: f64, x: f64 },

    #[error("transport map not increasing between x = {x0} and x = {x1} (T = {t0}, {t1})")]
    NotMonotone { x0: f64, x1: f64, t0: f64, t1: f64 },

    #[error("ODE step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("coincident grid points at x = {x}")]
    CoincidentPoints { x: f64 },

    #[error("quantile bracketing failed for level {level}")]
    Bracketing { level: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no sign change in bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("reference state has eigenvalue {0} on the boundary of [0, 1]")]
    SingularReference(f64),
    #[error("evaluation at {at} outside the sampled range [0, {max}]")]
    Extrapolation { at: f64, max: f64 },
    #[error("reference pair profile has vanishing norm")]
    DegenerateGap,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConverged { iterations: usize, residual: f64 },
    #[error("family member at h = {h} has positive free energy {f_value:e}")]
    FamilyViolation { h: f64, f_value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

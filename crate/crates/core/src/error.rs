use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability {0} outside [0, 1]")]
    Domain(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid distortion: {0}")]
    InvalidDistortion(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    /// A lattice construction condition failed; `condition` names it.
    #[error("infeasible lattice, {condition} violated: {detail}")]
    Infeasible {
        condition: &'static str,
        detail: String,
    },
    #[error("extrapolation did not converge: {0}")]
    NonConvergence(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

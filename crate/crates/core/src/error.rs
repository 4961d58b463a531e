use std::fmt;

use thiserror::Error;

/// A single violated parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct InvalidParam {
    pub name: &'static str,
    pub constraint: &'static str,
}

impl fmt::Display for InvalidParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violates `{}`", self.name, self.constraint)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<InvalidParam>),

    #[error("domain error in {what}: argument {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("quadrature failed on [{lo}, {hi}]: {reason}")]
    QuadratureFailure {
        lo: f64,
        hi: f64,
        reason: &'static str,
    },

    #[error("no bracket for target {target} within [{lo:e}, {hi:e}]")]
    BracketFailure { target: f64, lo: f64, hi: f64 },

    #[error("policy iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("policy requested at x = {x}, outside [0, {x_max}]")]
    PolicyOutOfRange { x: f64, x_max: f64 },

    #[error("{0} is only available for the exponential/power parametric family")]
    Unsupported(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure comes from user input rather than a numerical routine.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_) | Error::Config(_) | Error::Domain { .. }
        )
    }
}

fn join(v: &[InvalidParam]) -> String {
    v.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

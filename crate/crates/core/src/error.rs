//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("no feasible point found: {0}")]
    Infeasible(String),

    #[error("objective grows without bound (reached {value:e})")]
    Unbounded { value: f64 },

    #[error("did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("unsupported datum: {0}")]
    UnsupportedDatum(String),

    #[error("problem too large for tensor quadrature: {0}")]
    UnsupportedScale(String),

    #[error("grid too small: tail mass {tail_mass:e} at the padding boundary")]
    GridTooSmall { tail_mass: f64 },

    #[error("potential is not convex (second difference {min_second_difference:e})")]
    NotConvex { min_second_difference: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

//! Numerical toolkit for Gaussian Brascamp-Lieb constants, generalized
//! Legendre duality, and Bures-Wasserstein barycenters.
//!
//! * [`matrix`]: dense symmetric linear algebra (Jacobi eigen-solver, square
//!   roots, log-determinants, inertia).
//! * [`gaussian_bl`]: Brascamp-Lieb data, the closed-form Gaussian functional,
//!   the KW and inverse Gaussian constants.
//! * [`transport`]: W₂ and entropy of centered Gaussians, the barycenter fixed
//!   point and the barycentric Talagrand deficit.
//! * [`grid`]: even functions on symmetric grids, Legendre transforms, polar
//!   functions and tuples, volume products, affine surface areas.
//! * [`functional`]: quadrature of the BL functional and the convolution
//!   experiments.

pub mod error;
pub mod functional;
pub mod gaussian_bl;
pub mod grid;
pub mod matrix;
mod optim;
pub mod sampling;
pub mod transport;

pub use error::{Error, Result};
pub use functional::{
    ball_monotonicity_check, bl_functional_grid, clt_experiment, convolution_logconcavity_check,
    self_convolve_rescaled, ConvolutionStepReport, LogConcavityReport, MonotonicityReport,
    QuadratureResult,
};
pub use gaussian_bl::{
    assemble_m, bl_gaussian_value, bs_datum, bw_nondegenerate, gaussian_feasible,
    kw_datum, kw_gaussian_objective, optimize_inverse_constant, optimize_kw_constant,
    prop52_check, scaled_datum, stationarity_residuals, BLDatum, Convention, Direction, Extremum,
    GaussianTuple, OptimizationResult,
};
pub use grid::{ConcavityProfile, GridFunction};
pub use matrix::{log_det_spd, signature, sqrt_spd, sym_eigen, SpectralDecomposition, SymmetricMatrix};
pub use transport::{BarycenterResult, DeficitReport};

/// Version of this crate, stamped into experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

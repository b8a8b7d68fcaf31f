//! Brascamp-Lieb data and the Gaussian side of the duality: the closed-form
//! Gaussian BL functional, feasibility of the generalized Legendre duality for
//! centered Gaussians, the KW and inverse Gaussian constants, and the
//! stationarity system satisfied by a KW maximizer.

mod optimize;
mod prop52;

pub use optimize::{
    optimize_inverse_constant, optimize_kw_constant, p_limit, Direction, Extremum,
    InverseOptions, KwOptions, OptimizationResult, PLimitPoint, PLimitReport, TraceEntry,
};
pub use prop52::{prop52_check, Prop52Report};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::{inverse_spd, log_det_spd, signature, sym_eigen, SymmetricMatrix, PSD_TOL};

/// A Brascamp-Lieb datum `(n, c, Q)` with the linear maps fixed to the
/// coordinate projections of `R^N = R^{n_1} ⊕ … ⊕ R^{n_m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BLDatum {
    dims: Vec<usize>,
    exponents: Vec<f64>,
    kernel: SymmetricMatrix,
}

impl BLDatum {
    pub fn new(dims: Vec<usize>, exponents: Vec<f64>, kernel: SymmetricMatrix) -> Result<Self> {
        if dims.is_empty() || dims.len() != exponents.len() {
            return Err(Error::InvalidInput(
                "dims and exponents must be non-empty and of equal length".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput("every block dimension must be positive".into()));
        }
        if exponents.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput("exponents must be positive and finite".into()));
        }
        let total: usize = dims.iter().sum();
        if kernel.dim() != total {
            return Err(Error::InvalidInput(format!(
                "kernel has dimension {} but the blocks sum to {total}",
                kernel.dim()
            )));
        }
        if !kernel.is_finite() {
            return Err(Error::InvalidInput("kernel has non-finite entries".into()));
        }
        Ok(Self { dims, exponents, kernel })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn kernel(&self) -> &SymmetricMatrix {
        &self.kernel
    }

    /// Number of factors `m`.
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// `N = Σ nᵢ`.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Offset of block `i` inside `R^N`.
    pub fn offsets(&self) -> Vec<usize> {
        self.dims
            .iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect()
    }

    /// All blocks of equal dimension and all exponents equal to one.
    pub fn is_kw_shaped(&self) -> bool {
        self.dims.iter().all(|&d| d == self.dims[0]) && self.exponents.iter().all(|&c| c == 1.0)
    }

    fn check_tuple(&self, a: &GaussianTuple) -> Result<()> {
        if a.convention() != Convention::Precision {
            return Err(Error::InvalidInput("expected a tuple in precision convention".into()));
        }
        if a.dims() != self.dims {
            return Err(Error::InvalidInput(format!(
                "tuple block dims {:?} do not match datum dims {:?}",
                a.dims(),
                self.dims
            )));
        }
        Ok(())
    }
}

/// Blaschke-Santaló datum: `m = 2`, `c = (1, 1)`, `Q = ½[[0, I], [I, 0]]`.
pub fn bs_datum(n: usize) -> Result<BLDatum> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mut q = SymmetricMatrix::zeros(2 * n);
    for k in 0..n {
        q.set(k, n + k, 0.5);
    }
    BLDatum::new(vec![n, n], vec![1.0, 1.0], q)
}

/// Kolesnikov-Werner datum: `m` blocks of size `n`, unit exponents, zero
/// diagonal blocks and off-diagonal blocks `I / (2(m-1))`.
pub fn kw_datum(m: usize, n: usize) -> Result<BLDatum> {
    if m < 2 || n == 0 {
        return Err(Error::InvalidInput("kw_datum needs m >= 2 and n >= 1".into()));
    }
    let w = 1.0 / (2.0 * (m as f64 - 1.0));
    let mut q = SymmetricMatrix::zeros(m * n);
    for i in 0..m {
        for j in (i + 1)..m {
            for k in 0..n {
                q.set(i * n + k, j * n + k, w);
            }
        }
    }
    BLDatum::new(vec![n; m], vec![1.0; m], q)
}

/// `cᵢ(p) = (cᵢ + p)/p`, `Q_p = Q/p`. Not idempotent: scaling twice by `p = 1`
/// gives exponents `cᵢ + 2`.
pub fn scaled_datum(base: &BLDatum, p: f64) -> Result<BLDatum> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("scaling parameter p must be positive, got {p}")));
    }
    let exponents = base.exponents.iter().map(|c| (c + p) / p).collect();
    BLDatum::new(base.dims.clone(), exponents, base.kernel.scale(1.0 / p))
}

/// Whether the matrices of a tuple parametrize `g_A = e^{-½⟨x,Ax⟩}` or the
/// centered Gaussian measure `γ_A` with covariance `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Precision,
    Covariance,
}

/// An m-tuple of symmetric positive definite matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTuple {
    blocks: Vec<SymmetricMatrix>,
    convention: Convention,
}

impl GaussianTuple {
    pub fn new(blocks: Vec<SymmetricMatrix>, convention: Convention) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("tuple must have at least one block".into()));
        }
        for b in &blocks {
            let e = sym_eigen(b)?;
            if e.eigenvalues[0] <= 0.0 {
                return Err(Error::NotPositiveDefinite { eigenvalue: e.eigenvalues[0] });
            }
        }
        Ok(Self { blocks, convention })
    }

    pub fn identity(m: usize, n: usize, convention: Convention) -> Self {
        Self { blocks: vec![SymmetricMatrix::identity(n); m], convention }
    }

    /// Scalar 1-D tuple.
    pub fn scalars(values: &[f64], convention: Convention) -> Result<Self> {
        Self::new(values.iter().map(|&v| SymmetricMatrix::diagonal(&[v])).collect(), convention)
    }

    pub fn blocks(&self) -> &[SymmetricMatrix] {
        &self.blocks
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim()).collect()
    }

    /// Same Gaussians in the other convention (blockwise inverse).
    pub fn switch_convention(&self) -> Self {
        let convention = match self.convention {
            Convention::Precision => Convention::Covariance,
            Convention::Covariance => Convention::Precision,
        };
        let blocks = self.blocks.iter().map(|b| inverse_spd(b).expect("blocks are PD")).collect();
        Self { blocks, convention }
    }

    /// `(Σ ‖Aᵢ − Bᵢ‖_F²)^{1/2}`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.distance(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Distance to the tuple of identities.
    pub fn distance_to_identity(&self) -> f64 {
        self.blocks
            .iter()
            .map(|a| a.distance(&SymmetricMatrix::identity(a.dim())).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `M(A) = Σ cᵢ Pᵢ* Aᵢ Pᵢ − 2Q`.
pub fn assemble_m(datum: &BLDatum, a: &GaussianTuple) -> Result<SymmetricMatrix> {
    datum.check_tuple(a)?;
    Ok(assemble_m_blocks(datum, a.blocks()))
}

pub(crate) fn assemble_m_blocks(datum: &BLDatum, blocks: &[SymmetricMatrix]) -> SymmetricMatrix {
    let mut m = datum.kernel.scale(-2.0);
    for ((b, off), c) in blocks.iter().zip(datum.offsets()).zip(&datum.exponents) {
        m.add_block(off, b, *c);
    }
    m
}

/// `(g_{A_1}, …, g_{A_m})` satisfies the duality relation iff `M(A) ⪰ 0`;
/// tested as `λ_min(M) ≥ −tol·‖M‖_F`.
pub fn gaussian_feasible(datum: &BLDatum, a: &GaussianTuple, tol: f64) -> Result<bool> {
    let m = assemble_m(datum, a)?;
    Ok(m.min_eigenvalue()? >= -tol * m.frobenius_norm())
}

/// `log BL(A)`; `+∞` when `M(A)` is not positive definite.
pub fn log_bl_gaussian_value(datum: &BLDatum, a: &GaussianTuple) -> Result<f64> {
    let m = assemble_m(datum, a)?;
    let e = sym_eigen(&m)?;
    if e.eigenvalues[0] <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let log_det_m: f64 = e.eigenvalues.iter().map(|l| l.ln()).sum();
    let mut v = 0.5 * (datum.total_dim() as f64 - weighted_dim(datum)) * (2.0 * PI).ln()
        - 0.5 * log_det_m;
    for (b, c) in a.blocks().iter().zip(&datum.exponents) {
        v += 0.5 * c * log_det_spd(b)?;
    }
    Ok(v)
}

/// `BL(A) = (2π)^{(N − Σcᵢnᵢ)/2} · det M(A)^{−1/2} · Π det(Aᵢ)^{cᵢ/2}`, or `+∞`.
pub fn bl_gaussian_value(datum: &BLDatum, a: &GaussianTuple) -> Result<f64> {
    Ok(log_bl_gaussian_value(datum, a)?.exp())
}

/// `Σ cᵢ nᵢ`.
pub fn weighted_dim(datum: &BLDatum) -> f64 {
    datum.dims.iter().zip(&datum.exponents).map(|(&n, c)| c * n as f64).sum()
}

/// `Σ cᵢ·(−log det Aᵢ)`.
pub fn kw_gaussian_objective(datum: &BLDatum, a: &GaussianTuple) -> Result<f64> {
    datum.check_tuple(a)?;
    let mut v = 0.0;
    for (b, c) in a.blocks().iter().zip(&datum.exponents) {
        v -= c * log_det_spd(b)?;
    }
    Ok(v)
}

/// Gaussian constant `Π det(2π Aᵢ⁻¹)^{cᵢ/2}` attached to a log-objective value.
pub fn kw_gaussian_constant(datum: &BLDatum, log_objective: f64) -> f64 {
    (0.5 * weighted_dim(datum) * (2.0 * PI).ln() + 0.5 * log_objective).exp()
}

pub const RESIDUAL_PRODUCT: &str = "pairwise_product";
pub const RESIDUAL_AVERAGE: &str = "maximizer_average";
pub const RESIDUAL_BARYCENTER: &str = "barycenter_consistency";

/// Residuals of the stationarity system of a KW maximizer (KW-shaped data only):
///
/// * `pairwise_product`: max over pairs of `‖Pᵢ − Pⱼ‖_F` with
///   `Pᵢ = ((m−1)/m·Aᵢ + I/m)((m−1)/m·I + Aᵢ⁻¹/m)`;
/// * `maximizer_average`: `‖Σ((m−1)Aᵢ + I)⁻¹ − I‖_F`;
/// * `barycenter_consistency`: max over pairs of the difference of the
///   barycenter candidates `((m−1)/m·Aᵢ + I/m)⁻¹((m−1)/m·I + Aᵢ⁻¹/m)⁻¹`.
pub fn stationarity_residuals(datum: &BLDatum, a: &GaussianTuple) -> Result<BTreeMap<String, f64>> {
    if !datum.is_kw_shaped() {
        return Err(Error::UnsupportedDatum(
            "stationarity residuals need equal block dims and unit exponents".into(),
        ));
    }
    datum.check_tuple(a)?;
    let m = datum.len() as f64;
    let n = datum.dims[0];
    let id = SymmetricMatrix::identity(n);
    let mut products = Vec::new();
    let mut barycenters = Vec::new();
    let mut average = id.scale(-1.0);
    for b in a.blocks() {
        let e = sym_eigen(b)?;
        let left = e.compose(|l| (m - 1.0) / m * l + 1.0 / m);
        let right = e.compose(|l| (m - 1.0) / m + 1.0 / (m * l));
        products.push(left.mul_commuting(&right));
        barycenters.push(e.compose(|l| 1.0 / (((m - 1.0) / m * l + 1.0 / m) * ((m - 1.0) / m + 1.0 / (m * l)))));
        average = average.add(&e.compose(|l| 1.0 / ((m - 1.0) * l + 1.0)));
    }
    let pairwise = |v: &[SymmetricMatrix]| {
        let mut r: f64 = 0.0;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                r = r.max(v[i].distance(&v[j]));
            }
        }
        r
    };
    let mut out = BTreeMap::new();
    out.insert(RESIDUAL_PRODUCT.to_string(), pairwise(&products));
    out.insert(RESIDUAL_AVERAGE.to_string(), average.frobenius_norm());
    out.insert(RESIDUAL_BARYCENTER.to_string(), pairwise(&barycenters));
    Ok(out)
}

/// Result of the Barthe-Wolff non-degeneracy test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BwReport {
    pub nondegenerate: bool,
    /// `s⁻(Q)`, the number of negative eigenvalues of the kernel.
    pub negative_eigenvalues: usize,
}

/// With positive exponents and projection maps the condition reduces to `s⁻(Q) = 0`.
pub fn bw_nondegenerate(datum: &BLDatum, tol: f64) -> Result<BwReport> {
    let (neg, _, _) = signature(&datum.kernel, tol)?;
    Ok(BwReport { nondegenerate: neg == 0, negative_eigenvalues: neg })
}

/// Default tolerance for feasibility and inertia tests.
pub const FEASIBILITY_TOL: f64 = PSD_TOL;

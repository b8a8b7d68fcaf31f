//! The linear-algebra system behind the uniqueness step for KW maximizers:
//! `0 < Xᵢ < I`, `Σ Xᵢ = I`, `Xᵢ − Xᵢ² = Xⱼ − Xⱼ²`, with `Xᵢ = ((m−1)Aᵢ + I)⁻¹`.

use crate::error::{Error, Result};
use crate::matrix::{sym_eigen, SymmetricMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Prop52Report {
    pub m: usize,
    pub n: usize,
    /// Largest amount by which an eigenvalue leaves `[0, 1]`, zero if none does.
    pub bounds_violation: f64,
    /// Smallest distance of an eigenvalue to `{0, 1}`; positive iff `0 < Xᵢ < I`.
    pub bounds_margin: f64,
    /// `‖ΣXᵢ − I‖_F`.
    pub sum_residual: f64,
    /// Max over pairs of `‖(Xᵢ − Xᵢ²) − (Xⱼ − Xⱼ²)‖_F`.
    pub quadratic_residual: f64,
    /// Common `α ≤ ½` with `X₁ − X₁² ≈ α(1−α)I`.
    pub alpha: f64,
    /// `‖X₁ − X₁² − α(1−α)I‖_F`.
    pub scalar_residual: f64,
    /// Max distance of an eigenvalue of some `Xᵢ` to `{α, 1−α}`.
    pub eigenvalue_residual: f64,
    /// Max over `ℓ ≤ 6` and `i` of the defect in
    /// `Xᵢ^ℓ = ((1−α)^ℓ − α^ℓ)/(1−2α)·Xᵢ − (α−α²)/(1−2α)·((1−α)^{ℓ−1} − α^{ℓ−1})·I`;
    /// `None` when `α = ½`.
    pub power_identity_residual: Option<f64>,
    /// `maxᵢ ‖Xᵢ − I/m‖₂` (spectral norm).
    pub distance: f64,
}

impl Prop52Report {
    /// Conditions (i)-(iii) hold within `tol`. (i) must hold with margin
    /// above `tol`: limits of the search on the boundary (an eigenvalue at
    /// 0 or 1 up to rounding) are not solutions.
    pub fn constraints_hold(&self, tol: f64) -> bool {
        self.bounds_margin > tol && self.sum_residual <= tol && self.quadratic_residual <= tol
    }
}

/// Highest power checked in the power identity.
pub const MAX_POWER: i32 = 6;

pub fn prop52_check(x: &[SymmetricMatrix], _tol: f64) -> Result<Prop52Report> {
    let m = x.len();
    if m < 2 {
        return Err(Error::InvalidInput("need at least two matrices".into()));
    }
    let n = x[0].dim();
    if x.iter().any(|b| b.dim() != n) {
        return Err(Error::InvalidInput("all blocks must have the same dimension".into()));
    }
    let id = SymmetricMatrix::identity(n);
    let spectra = x.iter().map(sym_eigen).collect::<Result<Vec<_>>>()?;
    let mut bounds_violation: f64 = 0.0;
    let mut bounds_margin = f64::INFINITY;
    for e in &spectra {
        for &l in &e.eigenvalues {
            bounds_violation = bounds_violation.max(-l).max(l - 1.0);
            bounds_margin = bounds_margin.min(l).min(1.0 - l);
        }
    }
    let sum = x.iter().fold(id.scale(-1.0), |acc, b| acc.add(b));
    let quad: Vec<SymmetricMatrix> = x.iter().map(|b| b.sub(&b.mul_commuting(b))).collect();
    let mut quadratic_residual: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            quadratic_residual = quadratic_residual.max(quad[i].distance(&quad[j]));
        }
    }
    let lambda = quad[0].trace() / n as f64;
    let alpha = 0.5 * (1.0 - (1.0 - 4.0 * lambda).max(0.0).sqrt());
    let scalar_residual = quad[0].distance(&id.scale(alpha * (1.0 - alpha)));
    let eigenvalue_residual = spectra
        .iter()
        .flat_map(|e| e.eigenvalues.iter())
        .map(|&l| (l - alpha).abs().min((l - 1.0 + alpha).abs()))
        .fold(0.0, f64::max);
    let power_identity_residual = if (1.0 - 2.0 * alpha).abs() < 1e-8 {
        None
    } else {
        let d = 1.0 - 2.0 * alpha;
        let mut worst: f64 = 0.0;
        for b in x {
            let mut power = b.clone();
            for l in 1..=MAX_POWER {
                if l > 1 {
                    power = power.mul_commuting(b);
                }
                let a = ((1.0 - alpha).powi(l) - alpha.powi(l)) / d;
                let c = (alpha - alpha * alpha) / d * ((1.0 - alpha).powi(l - 1) - alpha.powi(l - 1));
                let rhs = b.affine(a, -c);
                worst = worst.max(power.distance(&rhs));
            }
        }
        Some(worst)
    };
    let center = id.scale(1.0 / m as f64);
    let mut distance: f64 = 0.0;
    for b in x {
        let e = sym_eigen(&b.sub(&center))?;
        distance = distance.max(e.eigenvalues[0].abs()).max(e.eigenvalues[n - 1].abs());
    }
    Ok(Prop52Report {
        m,
        n,
        bounds_violation,
        bounds_margin,
        sum_residual: sum.frobenius_norm(),
        quadratic_residual,
        alpha,
        scalar_residual,
        eigenvalue_residual,
        power_identity_residual,
        distance,
    })
}

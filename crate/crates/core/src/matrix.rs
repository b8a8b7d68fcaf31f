//! Dense real symmetric matrices and their spectral calculus.
//!
//! Everything downstream (kernels, Gaussian tuples, barrier Hessians) is small:
//! dimensions stay below a few dozen. A cyclic Jacobi solver with a fixed pivot
//! order keeps eigen-decompositions accurate and bit-for-bit reproducible.

use crate::error::{Error, Result};

/// Relative tolerance under which an eigenvalue still counts as nonnegative.
pub const PSD_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Row-major dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds a matrix from row-major entries, replacing `a[i][j]` and `a[j][i]`
    /// by their average so the result is exactly symmetric.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self::symmetrized(dim, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("matrix rows must form a square array".into()));
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    fn symmetrized(dim: usize, mut data: Vec<f64>) -> Self {
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be at least 1");
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = s;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { dim: self.dim, data }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `a·self + b·id`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut m = self.scale(a);
        for i in 0..self.dim {
            m.data[i * self.dim + i] += b;
        }
        m
    }

    /// Frobenius distance to another matrix of the same size.
    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).frobenius_norm()
    }

    /// Plain row-major product `self · other`, not necessarily symmetric.
    pub fn mul(&self, other: &Self) -> Vec<f64> {
        matmul(&self.data, &other.data, self.dim)
    }

    /// Product of two matrices known to commute (for instance two spectral
    /// functions of the same matrix), symmetrized against rounding.
    pub fn mul_commuting(&self, other: &Self) -> Self {
        Self::symmetrized(self.dim, self.mul(other))
    }

    /// `s · self · s` for symmetric `s`.
    pub fn congruence(&self, s: &Self) -> Self {
        let t = matmul(&s.data, &self.data, self.dim);
        Self::symmetrized(self.dim, matmul(&t, &s.data, self.dim))
    }

    /// `tᵀ · self · t` for a general square `t` given row-major.
    pub fn congruence_general(&self, t: &[f64]) -> Self {
        let n = self.dim;
        let mut tt = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                tt[j * n + i] = t[i * n + j];
            }
        }
        let a = matmul(&tt, &self.data, n);
        Self::symmetrized(n, matmul(&a, t, n))
    }

    /// Principal sub-block starting at `offset`.
    pub fn block(&self, offset: usize, size: usize) -> Self {
        let mut b = Self::zeros(size);
        for i in 0..size {
            for j in 0..size {
                b.data[i * size + j] = self.get(offset + i, offset + j);
            }
        }
        b
    }

    /// Writes `scale·block` into the principal sub-block at `offset` (additively).
    pub fn add_block(&mut self, offset: usize, block: &Self, scale: f64) {
        let s = block.dim;
        for i in 0..s {
            for j in 0..s {
                self.data[(offset + i) * self.dim + offset + j] += scale * block.get(i, j);
            }
        }
    }

    /// Block-diagonal direct sum.
    pub fn direct_sum(blocks: &[Self]) -> Self {
        let n: usize = blocks.iter().map(|b| b.dim).sum();
        let mut m = Self::zeros(n);
        let mut off = 0;
        for b in blocks {
            m.add_block(off, b, 1.0);
            off += b.dim;
        }
        m
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(sym_eigen(self)?.eigenvalues[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*sym_eigen(self)?.eigenvalues.last().unwrap())
    }

    /// `f(self)` through the eigen-decomposition.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(sym_eigen(self)?.compose(f))
    }
}

pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Eigenvalues in ascending order with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Row-major; column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.eigenvectors[i * n + k]).collect()
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn compose(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let n = self.dim();
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let v = &self.eigenvectors;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += v[i * n + k] * fl[k] * v[j * n + k];
                }
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SymmetricMatrix { dim: n, data }
    }

    /// `Vᵀ · G · V` for symmetric `G`.
    pub fn to_eigenbasis(&self, g: &SymmetricMatrix) -> SymmetricMatrix {
        g.congruence_general(&self.eigenvectors)
    }

    /// `V · H · Vᵀ`.
    pub fn from_eigenbasis(&self, h: &SymmetricMatrix) -> SymmetricMatrix {
        let n = self.dim();
        let mut vt = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                vt[j * n + i] = self.eigenvectors[i * n + j];
            }
        }
        h.congruence_general(&vt)
    }
}

/// Cyclic Jacobi eigen-decomposition with pivots visited in row-major order.
pub fn sym_eigen(m: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.dim;
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues = order.iter().map(|&k| a[k * n + k]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[i * n + new] = v[i * n + old];
        }
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// PSD square root. Eigenvalues in `[-tol·‖m‖_F, 0)` are clamped to zero.
pub fn sqrt_spd(m: &SymmetricMatrix, tol: f64) -> Result<SymmetricMatrix> {
    let e = sym_eigen(m)?;
    let floor = -tol * m.frobenius_norm();
    if e.eigenvalues[0] < floor {
        return Err(Error::NotPositiveSemidefinite { eigenvalue: e.eigenvalues[0] });
    }
    Ok(e.compose(|l| l.max(0.0).sqrt()))
}

/// `Σ log λᵢ`, summed in ascending eigenvalue order.
pub fn log_det_spd(m: &SymmetricMatrix) -> Result<f64> {
    let e = sym_eigen(m)?;
    if e.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: e.eigenvalues[0] });
    }
    Ok(e.eigenvalues.iter().map(|l| l.ln()).sum())
}

/// Inertia `(n_neg, n_zero, n_pos)` with zero band `±tol·‖m‖_F`.
pub fn signature(m: &SymmetricMatrix, tol: f64) -> Result<(usize, usize, usize)> {
    let e = sym_eigen(m)?;
    let band = tol * m.frobenius_norm();
    let neg = e.eigenvalues.iter().filter(|&&l| l < -band).count();
    let pos = e.eigenvalues.iter().filter(|&&l| l > band).count();
    Ok((neg, m.dim - neg - pos, pos))
}

/// Real power of a positive definite matrix.
pub fn spd_power(m: &SymmetricMatrix, p: f64) -> Result<SymmetricMatrix> {
    let e = sym_eigen(m)?;
    if e.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: e.eigenvalues[0] });
    }
    Ok(e.compose(|l| l.powf(p)))
}

pub fn inverse_spd(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    spd_power(m, -1.0)
}

/// Lower Cholesky factor, used where only definiteness, log-determinants and
/// inverses are needed.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// `None` unless `m` is numerically positive definite.
    pub fn new(m: &SymmetricMatrix) -> Option<Self> {
        let n = m.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Self { n, l })
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> SymmetricMatrix {
        let n = self.n;
        // L⁻¹ by forward substitution, then L⁻ᵀ L⁻¹.
        let mut li = vec![0.0; n * n];
        for c in 0..n {
            for i in c..n {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in c..i {
                    s -= self.l[i * n + k] * li[k * n + c];
                }
                li[i * n + c] = s / self.l[i * n + i];
            }
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in j..n {
                    s += li[k * n + i] * li[k * n + j];
                }
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SymmetricMatrix { dim: n, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let e = sym_eigen(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_spectrum_has_axis_vectors() {
        let e = sym_eigen(&SymmetricMatrix::diagonal(&[5.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, 5.0]);
        assert_eq!(e.vector(0).iter().map(|v| v.abs()).collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn swap_matrix_spectrum() {
        let m = SymmetricMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = sym_eigen(&m).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_is_rejected() {
        let m = SymmetricMatrix::diagonal(&[1.0, f64::NAN]);
        assert!(matches!(sym_eigen(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn construction_symmetrizes() {
        let m = SymmetricMatrix::new(2, vec![1.0, 2.0, 4.0, 1.0]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert!(SymmetricMatrix::new(0, vec![]).is_err());
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = sqrt_spd(&SymmetricMatrix::diagonal(&[4.0, 9.0]), PSD_TOL).unwrap();
        assert!(r.distance(&SymmetricMatrix::diagonal(&[2.0, 3.0])) < 1e-15);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = SymmetricMatrix::diagonal(&[1.0, -0.5]);
        assert!(matches!(sqrt_spd(&m, PSD_TOL), Err(Error::NotPositiveSemidefinite { .. })));
        // tiny negative eigenvalues are clamped
        let m = SymmetricMatrix::diagonal(&[1.0, -1e-13]);
        assert_eq!(sqrt_spd(&m, PSD_TOL).unwrap().get(1, 1), 0.0);
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(log_det_spd(&SymmetricMatrix::identity(5)).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((log_det_spd(&SymmetricMatrix::diagonal(&[e, e])).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            log_det_spd(&SymmetricMatrix::diagonal(&[1.0, 0.0])),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn signature_of_zero() {
        assert_eq!(signature(&SymmetricMatrix::zeros(4), PSD_TOL).unwrap(), (0, 4, 0));
    }

    #[test]
    fn cholesky_matches_spectral() {
        let m = SymmetricMatrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ])
        .unwrap();
        let c = Cholesky::new(&m).unwrap();
        assert!((c.log_det() - log_det_spd(&m).unwrap()).abs() < 1e-13);
        assert!(c.inverse().distance(&inverse_spd(&m).unwrap()) < 1e-13);
        assert!(Cholesky::new(&SymmetricMatrix::diagonal(&[1.0, 0.0])).is_none());
    }
}

//! Unconstrained quasi-Newton minimization and the matrix-exponential chart
//! used by the Gaussian optimizers.

use crate::matrix::{sym_eigen, SpectralDecomposition, SymmetricMatrix};

/// Packs tuples of symmetric blocks into a flat vector. Off-diagonal entries are
/// stored as `√2·S_jk`, so the Euclidean norm of the vector is the Frobenius
/// norm of the tuple and packed gradients are Frobenius gradients.
#[derive(Debug, Clone)]
pub(crate) struct Chart {
    dims: Vec<usize>,
}

impl Chart {
    pub fn new(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().map(|n| n * (n + 1) / 2).sum()
    }

    pub fn pack(&self, blocks: &[SymmetricMatrix]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for b in blocks {
            let n = b.dim();
            for i in 0..n {
                out.push(b.get(i, i));
                for j in (i + 1)..n {
                    out.push(std::f64::consts::SQRT_2 * b.get(i, j));
                }
            }
        }
        out
    }

    pub fn unpack(&self, x: &[f64]) -> Vec<SymmetricMatrix> {
        let mut k = 0;
        self.dims
            .iter()
            .map(|&n| {
                let mut m = SymmetricMatrix::zeros(n);
                for i in 0..n {
                    m.set(i, i, x[k]);
                    k += 1;
                    for j in (i + 1)..n {
                        m.set(i, j, x[k] / std::f64::consts::SQRT_2);
                        k += 1;
                    }
                }
                m
            })
            .collect()
    }
}

/// `A = exp(S)` together with the data needed to pull gradients back to `S`.
pub(crate) struct ExpPoint {
    spectra: Vec<SpectralDecomposition>,
    pub blocks: Vec<SymmetricMatrix>,
}

impl ExpPoint {
    pub fn new(s: &[SymmetricMatrix]) -> Option<Self> {
        let spectra: Vec<_> = s.iter().map(|b| sym_eigen(b).ok()).collect::<Option<_>>()?;
        if spectra.iter().any(|e: &SpectralDecomposition| e.eigenvalues.iter().any(|&l| l.abs() > 600.0)) {
            return None;
        }
        let blocks = spectra.iter().map(|e| e.compose(f64::exp)).collect();
        Some(Self { spectra, blocks })
    }

    /// Log-eigenvalue range `max |λ(S_i)|`.
    pub fn log_scale(&self) -> f64 {
        self.spectra
            .iter()
            .flat_map(|e| e.eigenvalues.iter())
            .fold(0.0, |a, l| a.max(l.abs()))
    }

    /// Adjoint of the Fréchet derivative of `exp` at `S_i` applied to a
    /// gradient `G` with respect to `A_i`: `V (Γ ∘ VᵀGV) Vᵀ`, where `Γ` holds the
    /// divided differences of `exp` on the spectrum of `S_i`.
    #[cfg(test)]
    pub fn pullback(&self, i: usize, g: &SymmetricMatrix) -> SymmetricMatrix {
        let e = &self.spectra[i];
        let mut h = e.to_eigenbasis(g);
        let n = e.dim();
        for j in 0..n {
            for k in j..n {
                let (sj, sk) = (e.eigenvalues[j], e.eigenvalues[k]);
                let d = sj - sk;
                let gamma = if d == 0.0 { sk.exp() } else { sk.exp() * d.exp_m1() / d };
                h.set(j, k, h.get(j, k) * gamma);
            }
        }
        e.from_eigenbasis(&h)
    }

    /// `exp(−Sᵢ/2)`.
    pub fn inv_sqrt(&self, i: usize) -> SymmetricMatrix {
        self.spectra[i].compose(|l| (-0.5 * l).exp())
    }

    /// `pullback(i, A^{-1/2} X A^{-1/2})` without forming either factor:
    /// the divided differences of `exp` times `e^{−(sⱼ+sₖ)/2}` reduce to
    /// `sinh(d/2)/(d/2)` with `d = sⱼ − sₖ`, which stays bounded where the
    /// separate factors overflow.
    pub fn pullback_normalized(&self, i: usize, x: &SymmetricMatrix) -> SymmetricMatrix {
        let e = &self.spectra[i];
        let mut h = e.to_eigenbasis(x);
        let n = e.dim();
        for j in 0..n {
            for k in j..n {
                let half = 0.5 * (e.eigenvalues[j] - e.eigenvalues[k]);
                let phi = if half == 0.0 { 1.0 } else { half.sinh() / half };
                h.set(j, k, h.get(j, k) * phi);
            }
        }
        e.from_eigenbasis(&h)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsOptions {
    pub gtol: f64,
    pub max_iter: usize,
    /// Cap on the Euclidean length of a trial step.
    pub max_step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The monitor asked to stop.
    pub interrupted: bool,
    /// Inverse Hessian approximation, for warm starts.
    pub h: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-iteration decrease, relative to `1 + |f|`, below which a step counts as flat.
pub(crate) const STAGNATION_TOL: f64 = 1e-14;
/// Consecutive flat steps after which the value is taken as optimal to working precision.
pub(crate) const STAGNATION_STEPS: usize = 10;

/// BFGS with an Armijo backtracking line search. The objective returns `None`
/// outside its domain, which the line search treats as a failed trial. A step
/// that is accepted at unit length with a near-linear decrease is extended by
/// doubling while the value keeps dropping, so objectives that decrease without
/// bound are followed quickly.
///
/// The run is converged when the gradient norm reaches `gtol`, or when the
/// value stagnates at rounding level: either no Armijo step exists or
/// `STAGNATION_STEPS` consecutive steps each gain less than
/// `STAGNATION_TOL·(1 + |f|)`. Near the boundary of a barrier domain the
/// gradient carries rounding noise proportional to the condition number of the
/// barrier matrix, so `gtol` alone can be out of reach.
pub(crate) fn bfgs(
    objective: &mut dyn FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    x0: Vec<f64>,
    h0: Option<Vec<f64>>,
    opts: BfgsOptions,
    monitor: &mut dyn FnMut(&[f64], f64) -> bool,
) -> Option<BfgsOutcome> {
    let n = x0.len();
    let identity = || {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
        h
    };
    let (mut f, mut g) = objective(&x0)?;
    let mut x = x0;
    let mut fresh = h0.is_none();
    let mut h = h0.unwrap_or_else(identity);
    let mut iterations = 0;
    let mut interrupted = false;
    let mut flat_steps = 0;
    let mut stagnated = false;
    while iterations < opts.max_iter {
        if norm(&g) <= opts.gtol {
            break;
        }
        if monitor(&x, f) {
            interrupted = true;
            break;
        }
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity();
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let dn = norm(&d);
        if dn > opts.max_step {
            let s = opts.max_step / dn;
            d.iter_mut().for_each(|v| *v *= s);
            slope *= s;
        }
        let trial = |t: f64| -> Vec<f64> { x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect() };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xt = trial(t);
            if let Some((ft, gt)) = objective(&xt) {
                if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                    accepted = Some((xt, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((mut xn, mut fn_, mut gn)) = accepted else {
            stagnated = true;
            break;
        };
        if t == 1.0 && f - fn_ >= -0.9 * slope {
            let mut te = 2.0;
            for _ in 0..40 {
                let xt = trial(te);
                match objective(&xt) {
                    Some((ft, gt)) if ft.is_finite() && ft < fn_ => {
                        xn = xt;
                        fn_ = ft;
                        gn = gt;
                        te *= 2.0;
                    }
                    _ => break,
                }
            }
        }
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) && sy > 0.0 {
            if fresh {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if f - fn_ <= STAGNATION_TOL * (1.0 + f.abs()) {
            flat_steps += 1;
        } else {
            flat_steps = 0;
        }
        x = xn;
        f = fn_;
        g = gn;
        iterations += 1;
        if flat_steps >= STAGNATION_STEPS {
            stagnated = true;
            break;
        }
    }
    let grad_norm = norm(&g);
    Some(BfgsOutcome {
        converged: grad_norm <= opts.gtol || (stagnated && !interrupted),
        x,
        f,
        grad_norm,
        iterations,
        interrupted,
        h,
    })
}

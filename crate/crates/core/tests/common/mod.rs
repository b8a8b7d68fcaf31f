#![allow(dead_code)]

use blsat_core::gaussian_bl::{prop52_check, BLDatum, Convention, GaussianTuple};
use blsat_core::sampling::{random_orthogonal, random_spd, rng_for};
use blsat_core::{GridFunction, SymmetricMatrix};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

pub fn gauss(a: f64, radius: f64, points: usize) -> GridFunction {
    GridFunction::gaussian(&SymmetricMatrix::scalar(1, a), radius, points).unwrap()
}

pub fn potential(radius: f64, points: usize, phi: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_potential(1, radius, points, |x| phi(x[0])).unwrap()
}

/// `t*` with `M(tW) ⪰ 0` iff `t ≥ t*`: the largest eigenvalue of
/// `D^{-1/2}·2Q·D^{-1/2}`, `D = ⊕ cᵢWᵢ`.
pub fn boundary_scale(datum: &BLDatum, w: &[SymmetricMatrix]) -> f64 {
    let d = SymmetricMatrix::direct_sum(
        &w.iter().zip(datum.exponents()).map(|(b, c)| b.scale(*c)).collect::<Vec<_>>(),
    );
    let d_inv_sqrt = d.map_spectrum(|l| 1.0 / l.sqrt()).unwrap();
    datum.kernel().scale(2.0).congruence(&d_inv_sqrt).max_eigenvalue().unwrap()
}

/// Random SPD directions (spectra in `[0.1, 10]`) scaled by `factor · t*`;
/// factor 1 lands on the boundary.
pub fn scaled_sample(datum: &BLDatum, rng: &mut ChaCha8Rng, factor: f64) -> GaussianTuple {
    let w: Vec<SymmetricMatrix> = datum.dims().iter().map(|&n| random_spd(rng, n, 0.1, 10.0)).collect();
    let t = factor * boundary_scale(datum, &w);
    GaussianTuple::new(w.iter().map(|b| b.scale(t)).collect(), Convention::Precision).unwrap()
}

/// Twelve even log-concave functions with the dual radius to use for each.
pub fn volume_fixtures() -> Vec<(&'static str, GridFunction, Option<f64>)> {
    let mut out = Vec::new();
    for (name, a) in [("g_1/4", 0.25), ("g_1/2", 0.5), ("g_1", 1.0), ("g_2", 2.0), ("g_4", 4.0)] {
        out.push((name, gauss(a, 10.0, 2001), None));
    }
    out.push(("exp_norm", GridFunction::exp_norm(1, 30.0, 3001).unwrap(), None));
    out.push(("quartic_a", GridFunction::quartic(1, 8.0, 801, 1.0, 0.05).unwrap(), None));
    out.push(("quartic_b", GridFunction::quartic(1, 12.0, 1201, 0.2, 0.01).unwrap(), None));
    out.push(("log_cosh", potential(20.0, 2001, |x| x.cosh().ln()), None));
    out.push(("abs_plus_square", potential(10.0, 1001, |x| x.abs() + 0.5 * x * x), None));
    out.push(("indicator", GridFunction::indicator(1, 1.0, 2.0, 401).unwrap(), Some(40.0)));
    out.push(("pure_quartic", potential(4.0, 801, |x| 0.25 * x.powi(4)), None));
    out
}

/// Inputs for the central-limit iteration.
pub fn clt_fixtures() -> Vec<(&'static str, GridFunction)> {
    vec![
        ("uniform", GridFunction::indicator(1, 1.0, 8.0, 801).unwrap()),
        ("laplace", GridFunction::exp_norm(1, 30.0, 3001).unwrap()),
        ("gaussian", gauss(1.0, 8.0, 801)),
        ("quartic", GridFunction::quartic(1, 8.0, 801, 0.5, 0.1).unwrap()),
        ("log_cosh", potential(20.0, 2001, |x| x.cosh().ln() + 0.25 * x * x)),
    ]
}

fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        for k in 0..n {
            a.swap(col * n + k, piv * n + k);
        }
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

fn unpack(u: &[f64], m: usize, n: usize) -> Vec<SymmetricMatrix> {
    let mut k = 0;
    let mut xs: Vec<SymmetricMatrix> = (0..m - 1)
        .map(|_| {
            let mut x = SymmetricMatrix::zeros(n);
            for i in 0..n {
                for j in i..n {
                    x.set(i, j, u[k]);
                    k += 1;
                }
            }
            x
        })
        .collect();
    let last = xs.iter().fold(SymmetricMatrix::identity(n), |acc, x| acc.sub(x));
    xs.push(last);
    xs
}

fn residual(u: &[f64], m: usize, n: usize) -> Vec<f64> {
    let xs = unpack(u, m, n);
    let quad: Vec<SymmetricMatrix> = xs.iter().map(|x| x.sub(&x.mul_commuting(x))).collect();
    let mut r = Vec::new();
    for q in &quad[..m - 1] {
        for i in 0..n {
            for j in i..n {
                r.push(q.get(i, j) - quad[m - 1].get(i, j));
            }
        }
    }
    r
}

/// Levenberg-Marquardt on `Xᵢ − Xᵢ² = X_m − X_m²` with `X_m = I − Σ_{i<m} Xᵢ`,
/// from a random start with `0 < Xᵢ` and `ΣXᵢ ≈ I`. Returns the final tuple
/// and residual norm.
pub fn prop52_search(m: usize, n: usize, seed: u64, trial: u64) -> (Vec<SymmetricMatrix>, f64) {
    let mut rng = rng_for(seed, trial);
    let mut u = Vec::new();
    for _ in 0..m - 1 {
        let q = random_orthogonal(&mut rng, n);
        let eig: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..1.6) / m as f64).collect();
        let mut x = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q[i * n + k] * eig[k] * q[j * n + k]).sum();
                x.set(i, j, v);
            }
        }
        for i in 0..n {
            for j in i..n {
                u.push(x.get(i, j));
            }
        }
    }
    let dim = u.len();
    let mut lambda = 1e-3;
    let mut r = residual(&u, m, n);
    let mut norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..500 {
        if norm < 1e-15 {
            break;
        }
        let eps = 1e-7;
        let mut jac = vec![0.0; r.len() * dim];
        for k in 0..dim {
            let mut up = u.clone();
            up[k] += eps;
            let mut um = u.clone();
            um[k] -= eps;
            let (rp, rm) = (residual(&up, m, n), residual(&um, m, n));
            for i in 0..r.len() {
                jac[i * dim + k] = (rp[i] - rm[i]) / (2.0 * eps);
            }
        }
        let mut jtj = vec![0.0; dim * dim];
        let mut jtr = vec![0.0; dim];
        for a in 0..dim {
            for b in 0..dim {
                jtj[a * dim + b] = (0..r.len()).map(|i| jac[i * dim + a] * jac[i * dim + b]).sum();
            }
            jtr[a] = -(0..r.len()).map(|i| jac[i * dim + a] * r[i]).sum::<f64>();
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for a in 0..dim {
                damped[a * dim + a] += lambda * (1.0 + jtj[a * dim + a]);
            }
            if let Some(step) = solve(damped, jtr.clone()) {
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + b).collect();
                let rt = residual(&trial, m, n);
                let nt = rt.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nt < norm {
                    u = trial;
                    r = rt;
                    norm = nt;
                    lambda = (lambda * 0.3).max(1e-15);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (unpack(&u, m, n), norm)
}

/// Whether a search result satisfies (i) strictly and (ii)-(iii) within `tol`.
pub fn prop52_solution(xs: &[SymmetricMatrix], tol: f64) -> bool {
    prop52_check(xs, tol).map(|r| r.constraints_hold(tol)).unwrap_or(false)
}

//! Seeded random matrices used for multistart and by the test oracles.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::SymmetricMatrix;

/// Independent deterministic stream `stream` of the generator seeded by `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `L·Lᵀ` with `L` an `n × 2n` standard normal matrix.
fn wishart(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
    let k = 2 * n;
    let l: Vec<f64> = (0..n * k).map(|_| standard_normal(rng)).collect();
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = (0..k).map(|r| l[i * k + r] * l[j * k + r]).sum();
        }
    }
    SymmetricMatrix::new(n, w).expect("square by construction")
}

/// [`wishart`] scaled so that `tr / n = 1`.
pub fn wishart_unit_trace(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
    let w = wishart(rng, n);
    let s = n as f64 / w.trace();
    w.scale(s)
}

/// Independent Wishart blocks scaled jointly to unit mean trace
/// `Σ tr Wᵢ / Σ nᵢ = 1`. Normalizing each block separately would make every
/// 1-D block equal to 1.
pub fn wishart_tuple(rng: &mut ChaCha8Rng, dims: &[usize]) -> Vec<SymmetricMatrix> {
    let w: Vec<SymmetricMatrix> = dims.iter().map(|&n| wishart(rng, n)).collect();
    let s = dims.iter().sum::<usize>() as f64 / w.iter().map(|b| b.trace()).sum::<f64>();
    w.iter().map(|b| b.scale(s)).collect()
}

/// Haar-distributed orthogonal matrix (row-major) via Gram-Schmidt with
/// sign correction.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= d * ci;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        cols.push(v.into_iter().map(|x| x / norm).collect());
    }
    let mut q = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            q[i * n + j] = c[i];
        }
    }
    q
}

/// Random SPD matrix `Uᵀ diag(λ) U` with eigenvalues log-uniform in `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> SymmetricMatrix {
    let (a, b) = (lo.ln(), hi.ln());
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(a..=b).exp()).collect();
    let u = random_orthogonal(rng, n);
    SymmetricMatrix::diagonal(&d).congruence_general(&u)
}

/// Symmetric matrix with independent standard normal entries on and above the diagonal.
pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
    let mut m = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            m.set(i, j, standard_normal(rng));
        }
    }
    m
}

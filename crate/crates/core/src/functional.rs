//! Quadrature of the Brascamp-Lieb functional for grid functions, and the
//! convolution experiments: rescaled self-convolution, its monotonicity, the
//! central-limit iteration and uniform log-concavity of convolutions.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::gaussian_bl::BLDatum;
use crate::grid::{check_factors, concavity_profile_above, quadratic_form, GridFunction};

/// Boundary-shell share of the numerator above which the integral is
/// declared non-decaying on the grid.
pub const BOUNDARY_SHARE: f64 = 1e-6;
/// Largest number of tensor axes handled by [`bl_functional_grid`].
pub const MAX_AXES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    /// `BL(f)`, or `+∞` when the boundary shell dominates.
    pub value: f64,
    pub log_value: f64,
    /// `log ∫ e^{⟨x,Qx⟩} Π fᵢ(xᵢ)^{cᵢ}` on the grid.
    pub log_numerator: f64,
    /// `Σ cᵢ log ∫ fᵢ`.
    pub log_denominator: f64,
    /// Share of the numerator carried by points on the outer faces of the grid.
    pub boundary_share: f64,
    pub boundary_dominated: bool,
    /// `|BL_h − BL_{2h}|/3`, the step-halving error estimate.
    pub richardson_error: f64,
}

/// Running `Σ wᵢ e^{eᵢ}` for the fine sum, its boundary part and the coarse
/// (`2h`) sum, all stored relative to a common shift.
#[derive(Clone, Copy)]
struct Accumulator {
    shift: f64,
    fine: f64,
    boundary: f64,
    coarse: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self { shift: f64::NEG_INFINITY, fine: 0.0, boundary: 0.0, coarse: 0.0 }
    }

    fn rescale(&mut self, shift: f64) {
        if shift > self.shift {
            let r = if self.shift == f64::NEG_INFINITY { 0.0 } else { (self.shift - shift).exp() };
            self.fine *= r;
            self.boundary *= r;
            self.coarse *= r;
            self.shift = shift;
        }
    }

    fn add(&mut self, e: f64, fine_w: f64, on_boundary: bool, coarse_w: f64) {
        self.rescale(e);
        let v = (e - self.shift).exp();
        self.fine += fine_w * v;
        if on_boundary {
            self.boundary += fine_w * v;
        }
        self.coarse += coarse_w * v;
    }

    fn merge(mut self, other: Self) -> Self {
        if other.shift == f64::NEG_INFINITY {
            return self;
        }
        self.rescale(other.shift);
        let r = (other.shift - self.shift).exp();
        self.fine += r * other.fine;
        self.boundary += r * other.boundary;
        self.coarse += r * other.coarse;
        self
    }
}

/// `BL(f) = ∫ e^{⟨x,Qx⟩} Π fᵢ(xᵢ)^{cᵢ} dx / Π (∫fᵢ)^{cᵢ}` by tensor trapezoid on
/// the product of the factor grids (at most three axes). The integral is
/// accumulated in log scale, slab by slab along the first axis.
pub fn bl_functional_grid(datum: &BLDatum, fs: &[GridFunction]) -> Result<QuadratureResult> {
    check_factors(datum, fs)?;
    let axes: usize = fs.iter().map(|f| f.dim()).sum();
    if axes > MAX_AXES {
        return Err(Error::UnsupportedScale(format!(
            "quadrature over {axes} tensor axes (at most {MAX_AXES})"
        )));
    }
    let c = datum.exponents();
    let q = datum.kernel();
    let factors: Vec<FactorTable> = fs.iter().zip(c).map(|(f, &ci)| FactorTable::new(f, ci)).collect();
    let offsets = datum.offsets();
    let acc = (0..factors[0].len())
        .into_par_iter()
        .map(|first| {
            let mut acc = Accumulator::new();
            let mut x = vec![0.0; datum.total_dim()];
            let mut idx = vec![0; factors.len()];
            idx[0] = first;
            loop {
                let mut penalty = 0.0;
                let mut fine_w = 1.0;
                let mut coarse_w = 1.0;
                let mut on_boundary = false;
                for (i, t) in factors.iter().enumerate() {
                    let k = idx[i];
                    penalty += t.penalty[k];
                    fine_w *= t.fine[k];
                    coarse_w *= t.coarse[k];
                    on_boundary |= t.boundary[k];
                    x[offsets[i]..offsets[i] + t.dim].copy_from_slice(&t.coords[k * t.dim..(k + 1) * t.dim]);
                }
                if penalty < f64::INFINITY {
                    acc.add(quadratic_form(q, &x) - penalty, fine_w, on_boundary, coarse_w);
                }
                let mut level = factors.len();
                loop {
                    if level == 1 {
                        return acc;
                    }
                    level -= 1;
                    idx[level] += 1;
                    if idx[level] < factors[level].len() {
                        break;
                    }
                    idx[level] = 0;
                }
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Accumulator::new(), Accumulator::merge);
    let log_numerator = acc.fine.ln() + acc.shift;
    let log_denominator: f64 = fs.iter().zip(c).map(|(f, ci)| ci * f.log_integral_strided(1)).sum();
    let coarse_denominator: f64 = fs.iter().zip(c).map(|(f, ci)| ci * f.log_integral_strided(2)).sum();
    let log_value = log_numerator - log_denominator;
    let coarse_log = acc.coarse.ln() + acc.shift - coarse_denominator;
    let boundary_share = acc.boundary / acc.fine;
    let boundary_dominated = !(boundary_share <= BOUNDARY_SHARE);
    let value = if boundary_dominated { f64::INFINITY } else { log_value.exp() };
    Ok(QuadratureResult {
        value,
        log_value: if boundary_dominated { f64::INFINITY } else { log_value },
        log_numerator,
        log_denominator,
        boundary_share,
        boundary_dominated,
        richardson_error: (log_value.exp() - coarse_log.exp()).abs() / 3.0,
    })
}

/// Per-point data of one factor: `cᵢφᵢ`, fine and coarse trapezoid weights,
/// whether the point lies on the outer faces of the grid, and its coordinates.
struct FactorTable {
    dim: usize,
    penalty: Vec<f64>,
    fine: Vec<f64>,
    coarse: Vec<f64>,
    boundary: Vec<bool>,
    coords: Vec<f64>,
}

impl FactorTable {
    fn new(f: &GridFunction, c: f64) -> Self {
        let n = f.points();
        let on_coarse = |k: usize| match f.dim() {
            1 => k % 2 == 0,
            _ => (k / n) % 2 == 0 && (k % n) % 2 == 0,
        };
        let edge = |i: usize| i == 0 || i == n - 1;
        let len = f.len();
        Self {
            dim: f.dim(),
            penalty: f.potential().iter().map(|p| c * p).collect(),
            fine: (0..len).map(|k| f.weight_strided(k, 1)).collect(),
            coarse: (0..len).map(|k| if on_coarse(k) { f.weight_strided(k, 2) } else { 0.0 }).collect(),
            boundary: (0..len)
                .map(|k| match f.dim() {
                    1 => edge(k),
                    _ => edge(k / n) || edge(k % n),
                })
                .collect(),
            coords: (0..len).flat_map(|k| f.point(k)).collect(),
        }
    }

    fn len(&self) -> usize {
        self.penalty.len()
    }
}

/// Full linear convolution `(a ∗ b)_k = Σᵢ aᵢ b_{k−i}`, length `|a| + |b| − 1`,
/// through a zero-padded FFT of power-of-two length.
pub(crate) fn linear_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..len].iter().map(|z| z.re * scale).collect()
}

fn require_1d(f: &GridFunction) -> Result<()> {
    if f.dim() != 1 {
        return Err(Error::InvalidInput("convolution experiments are one-dimensional".into()));
    }
    Ok(())
}

/// Below this share of the peak the FFT result carries too little relative
/// precision and `log(f ∗ g)` is summed directly.
pub const DIRECT_SUM_SHARE: f64 = 1e-6;

/// Largest share of the mass of `f ∗ f` allowed outside `|z| ≤ √2·R`.
pub const TAIL_MASS_LIMIT: f64 = 1e-9;

/// Log-density of `μ₁ ∗ μ₂` at `z_k = (k − (N−1))h`, `k < 2N − 1`, where `μ`
/// puts the trapezoid weight `w_i f(x_i)` at each grid point. The discrete
/// measures carry exactly the trapezoid mass and second moment of the inputs,
/// and both add under convolution; a plain Riemann sum widens a compact
/// support by `h`. Values come from the FFT near the bulk and from a
/// log-sum-exp over the grid in the tails, where FFT rounding (about 1e-16 of
/// the peak) would swamp them.
fn sampled_log_convolution(f1: &GridFunction, f2: &GridFunction) -> Vec<f64> {
    let h = f1.spacing();
    let weighted = |f: &GridFunction| -> Vec<f64> {
        f.density().iter().enumerate().map(|(k, d)| d * f.weight_strided(k, 1)).collect()
    };
    let log_weighted = |f: &GridFunction| -> Vec<f64> {
        f.potential().iter().enumerate().map(|(k, p)| f.weight_strided(k, 1).ln() - p).collect()
    };
    let fft = linear_convolution(&weighted(f1), &weighted(f2));
    let peak = fft.iter().copied().fold(0.0, f64::max);
    let (l1, l2) = (log_weighted(f1), log_weighted(f2));
    let n = l1.len();
    let ln_h = h.ln();
    fft.iter()
        .enumerate()
        .map(|(k, &v)| {
            if v >= DIRECT_SUM_SHARE * peak {
                return (v / h).ln();
            }
            let range = k.saturating_sub(n - 1)..=k.min(n - 1);
            let terms = || range.clone().map(|i| l1[i] + l2[k - i]);
            let max = terms().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return max;
            }
            max + terms().map(|t| (t - max).exp()).sum::<f64>().ln() - ln_h
        })
        .collect()
}

fn lagrange_weights(u: f64) -> [f64; 4] {
    [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ]
}

/// `2^{1/2}·(f ∗ f)(√2·x)` on the grid of `f`. The convolution comes from
/// [`sampled_log_convolution`]; the `√2` resampling uses 4-point Lagrange
/// interpolation of `log(f ∗ f)` (of `f ∗ f` itself next to points outside the
/// support), and the result is scaled so that its trapezoid mass is `(∫f)²`,
/// as for the exact operation.
pub fn self_convolve_rescaled(f: &GridFunction) -> Result<GridFunction> {
    require_1d(f)?;
    let n = f.points();
    let h = f.spacing();
    let log_conv = sampled_log_convolution(f, f);
    let center = (n - 1) as f64;
    let total: f64 = log_conv.iter().map(|v| v.exp()).sum::<f64>() * h;
    let reach = std::f64::consts::SQRT_2 * f.radius();
    let tail: f64 = log_conv
        .iter()
        .enumerate()
        .filter(|(k, _)| ((*k as f64 - center) * h).abs() > reach + 1e-12 * reach)
        .map(|(_, v)| v.exp())
        .sum::<f64>()
        * h;
    if total > 0.0 && tail / total > TAIL_MASS_LIMIT {
        return Err(Error::GridTooSmall { tail_mass: tail / total });
    }
    let last = log_conv.len() - 1;
    let log_sample = |z: f64| -> f64 {
        let t = z / h + center;
        let i0 = t.floor();
        let u = t - i0;
        let i0 = i0 as isize;
        if u == 0.0 {
            return log_conv[i0 as usize];
        }
        let w = lagrange_weights(u);
        let vals: Vec<f64> = (-1..=2).map(|d| log_conv[(i0 + d).clamp(0, last as isize) as usize]).collect();
        if vals.iter().all(|v| v.is_finite()) {
            w.iter().zip(&vals).map(|(wi, v)| wi * v).sum()
        } else {
            w.iter().zip(&vals).map(|(wi, v)| wi * v.exp()).sum::<f64>().max(0.0).ln()
        }
    };
    let half_ln2 = 0.5 * std::f64::consts::LN_2;
    let log_density: Vec<f64> =
        (0..n).map(|i| half_ln2 + log_sample(std::f64::consts::SQRT_2 * f.coordinate(i))).collect();
    let raw = GridFunction::new(1, f.radius(), n, log_density.iter().map(|l| -l).collect())?;
    let shift = 2.0 * f.log_integral_strided(1) - raw.log_integral_strided(1);
    GridFunction::new(1, f.radius(), n, log_density.iter().map(|l| -(l + shift)).collect())
}

/// `f₁ ∗ f₂` sampled on the common grid of the inputs.
pub fn convolve(f1: &GridFunction, f2: &GridFunction) -> Result<GridFunction> {
    require_1d(f1)?;
    require_1d(f2)?;
    if !f1.same_grid(f2) {
        return Err(Error::InvalidInput("convolution needs both functions on the same grid".into()));
    }
    let n = f1.points();
    let log_conv = sampled_log_convolution(f1, f2);
    let offset = (n - 1) / 2;
    GridFunction::new(1, f1.radius(), n, log_conv[offset..offset + n].iter().map(|l| -l).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub bl_value: f64,
    pub convolved_bl_value: f64,
    pub reference: f64,
    /// `BL(f)² − reference·BL(2^{1/2} f ∗ f(√2·))`.
    pub margin: f64,
}

/// Compares `BL(f)²` with `reference · BL` of the rescaled self-convolutions,
/// factor by factor.
pub fn ball_monotonicity_check(
    datum: &BLDatum,
    fs: &[GridFunction],
    reference: f64,
) -> Result<MonotonicityReport> {
    let before = bl_functional_grid(datum, fs)?;
    let convolved = fs.iter().map(self_convolve_rescaled).collect::<Result<Vec<_>>>()?;
    let after = bl_functional_grid(datum, &convolved)?;
    Ok(MonotonicityReport {
        bl_value: before.value,
        convolved_bl_value: after.value,
        reference,
        margin: before.value * before.value - reference * after.value,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionStepReport {
    pub step: usize,
    /// `∫|f/∫f − γ_σ|` with `σ²` the second moment of the input.
    pub l1_to_gaussian: f64,
    pub mass: f64,
    pub lambda_est: f64,
    pub lambda_max_est: f64,
}

/// Curvature profiles of computed densities ignore points below this share of the peak.
pub const PROFILE_FLOOR: f64 = 1e-8;

fn l1_to_gaussian(f: &GridFunction, variance: f64) -> f64 {
    let mass = f.integral();
    let h = f.spacing();
    let n = f.points();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * variance).sqrt();
    f.density()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let x = f.coordinate(i);
            let g = norm * (-0.5 * x * x / variance).exp();
            let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            w * (d / mass - g).abs()
        })
        .sum()
}

/// Normalizes `f`, then applies [`self_convolve_rescaled`] `steps` times. Report
/// `k` describes the `k`-th iterate (report 0 is the normalized input); the
/// reference Gaussian has the second moment of the input, which the iteration
/// preserves.
pub fn clt_experiment(f: &GridFunction, steps: usize) -> Result<Vec<ConvolutionStepReport>> {
    require_1d(f)?;
    let mut current = f.normalized()?;
    let variance = current.second_moment();
    let mut out = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        if step > 0 {
            current = self_convolve_rescaled(&current)?;
        }
        let profile = concavity_profile_above(&current, PROFILE_FLOOR)?;
        out.push(ConvolutionStepReport {
            step,
            l1_to_gaussian: l1_to_gaussian(&current, variance),
            mass: current.integral(),
            lambda_est: profile.lambda_est,
            lambda_max_est: profile.lambda_max_est,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogConcavityReport {
    pub lambda_in: [f64; 2],
    pub lambda_max_in: [f64; 2],
    pub lambda_out: f64,
    pub lambda_max_out: f64,
    /// `(λ₁⁻¹ + λ₂⁻¹)⁻¹`.
    pub lambda_bound: f64,
    /// `(Λ₁⁻¹ + Λ₂⁻¹)⁻¹` when both are finite.
    pub lambda_max_bound: Option<f64>,
    /// `10h²`.
    pub tolerance: f64,
    pub lambda_ok: bool,
    pub lambda_max_ok: Option<bool>,
}

/// Profiles `f₁ ∗ f₂` and compares its curvature bounds with
/// `(λ₁⁻¹ + λ₂⁻¹)⁻¹` and `(Λ₁⁻¹ + Λ₂⁻¹)⁻¹`.
pub fn convolution_logconcavity_check(f1: &GridFunction, f2: &GridFunction) -> Result<LogConcavityReport> {
    let p1 = concavity_profile_above(f1, PROFILE_FLOOR)?;
    let p2 = concavity_profile_above(f2, PROFILE_FLOOR)?;
    for p in [&p1, &p2] {
        if !(p.lambda_est > 0.0) {
            return Err(Error::InvalidInput(format!(
                "input is not uniformly log-concave (lambda_est = {})",
                p.lambda_est
            )));
        }
    }
    let out = concavity_profile_above(&convolve(f1, f2)?, PROFILE_FLOOR)?;
    let h = f1.spacing();
    let tolerance = 10.0 * h * h;
    let harmonic = |a: f64, b: f64| 1.0 / (1.0 / a + 1.0 / b);
    let lambda_bound = harmonic(p1.lambda_est, p2.lambda_est);
    let lambda_max_bound = (p1.lambda_max_est.is_finite() && p2.lambda_max_est.is_finite())
        .then(|| harmonic(p1.lambda_max_est, p2.lambda_max_est));
    Ok(LogConcavityReport {
        lambda_in: [p1.lambda_est, p2.lambda_est],
        lambda_max_in: [p1.lambda_max_est, p2.lambda_max_est],
        lambda_out: out.lambda_est,
        lambda_max_out: out.lambda_max_est,
        lambda_bound,
        lambda_max_bound,
        tolerance,
        lambda_ok: out.lambda_est >= lambda_bound - tolerance,
        lambda_max_ok: lambda_max_bound.map(|b| out.lambda_max_est <= b + tolerance),
    })
}

//! Multistart optimizers for the KW Gaussian constant (a maximization over the
//! spectrahedron `M(A) ⪰ 0`) and for the extrema of the Gaussian BL functional.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{
    assemble_m_blocks, kw_gaussian_constant, stationarity_residuals, weighted_dim, BLDatum,
    Convention, GaussianTuple,
};
use crate::error::{Error, Result};
use crate::matrix::{sym_eigen, Cholesky, SymmetricMatrix};
use crate::optim::{bfgs, BfgsOptions, BfgsOutcome, Chart, ExpPoint};
use crate::sampling::{rng_for, wishart_tuple};

/// One record of the optimizer log.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub start: usize,
    pub stage: usize,
    /// Barrier weight of the stage (0 when no barrier is used).
    pub mu: f64,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// How the reported extremum is reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Attained,
    /// Approached only along a sequence escaping every compact set.
    Asymptotic,
    /// The value grows without bound; `best_value` is `+∞`.
    Divergent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_value: f64,
    /// Natural logarithm of `best_value` where the operation works in log scale.
    pub log_value: Option<f64>,
    /// Maximizer or minimizer (precision convention for BL problems,
    /// covariance convention for the transport deficit).
    pub argopt: GaussianTuple,
    pub residuals: BTreeMap<String, f64>,
    pub starts_used: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub extremum: Extremum,
    /// Index of the start that produced the result.
    pub best_start: usize,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KwOptions {
    pub starts: usize,
    pub seed: u64,
    pub mu_start: f64,
    pub mu_end: f64,
    pub gtol: f64,
    pub max_iter: usize,
    pub unbounded_threshold: f64,
}

impl Default for KwOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            seed: 0,
            mu_start: 1.0,
            mu_end: 1e-8,
            gtol: 1e-9,
            max_iter: 5000,
            unbounded_threshold: 1e6,
        }
    }
}

const MAX_STEP: f64 = 2.0;

/// A KW iterate with `max |λ(log Aᵢ)|` above this (`e^{200} ≈ 1e87`) and a
/// positive objective is escaping towards `A → 0`; the objective is then
/// reported unbounded, since the chart would underflow long before
/// `unbounded_threshold` is reached. Escapes towards `A → ∞` lower the
/// objective and are left to the barrier.
pub const KW_ESCAPE_LOG_SCALE: f64 = 200.0;

fn escaped(s: &[SymmetricMatrix]) -> bool {
    ExpPoint::new(s).map_or(true, |p| p.log_scale() > KW_ESCAPE_LOG_SCALE)
}

/// Random start scaled into the interior of the spectrahedron: with
/// `D = ⊕ cᵢWᵢ`, `M(tW) ≻ 0` iff `t > λ_max(D^{-1/2} 2Q D^{-1/2})`.
fn feasible_start(datum: &BLDatum, seed: u64, index: usize) -> Option<Vec<SymmetricMatrix>> {
    let mut rng = rng_for(seed, index as u64);
    let w = wishart_tuple(&mut rng, datum.dims());
    let d = SymmetricMatrix::direct_sum(
        &w.iter().zip(datum.exponents()).map(|(b, c)| b.scale(*c)).collect::<Vec<_>>(),
    );
    let d_inv_sqrt = d.map_spectrum(|l| 1.0 / l.sqrt()).ok()?;
    let t_star = datum.kernel().scale(2.0).congruence(&d_inv_sqrt).max_eigenvalue().ok()?;
    let t = if t_star > 0.0 { 2.0 * t_star } else { 1.0 };
    let s: Vec<SymmetricMatrix> = w.iter().map(|b| b.scale(t).map_spectrum(f64::ln)).collect::<Result<_>>().ok()?;
    let p = ExpPoint::new(&s)?;
    Cholesky::new(&assemble_m_blocks(datum, &p.blocks))?;
    Some(s)
}

/// `log det M(A)` and its chart gradients `∂/∂Sᵢ log det M(A)`, evaluated
/// through `M̃ = I − D^{-1/2}·2Q·D^{-1/2}`, `D = ⊕cᵢAᵢ`, so that blocks of very
/// different scales do not swamp the factorization. `None` outside `M(A) ≻ 0`.
struct LogDetM {
    log_det: f64,
    grads: Vec<SymmetricMatrix>,
    normalized: SymmetricMatrix,
}

fn log_det_m(datum: &BLDatum, s: &[SymmetricMatrix], p: &ExpPoint) -> Option<LogDetM> {
    let c = datum.exponents();
    let offsets = datum.offsets();
    let d_inv_sqrt = SymmetricMatrix::direct_sum(
        &(0..s.len()).map(|i| p.inv_sqrt(i).scale(1.0 / c[i].sqrt())).collect::<Vec<_>>(),
    );
    let normalized = datum.kernel().scale(-2.0).congruence(&d_inv_sqrt).affine(1.0, 1.0);
    let ch = Cholesky::new(&normalized)?;
    let inv = ch.inverse();
    let mut log_det = ch.log_det();
    let mut grads = Vec::with_capacity(s.len());
    for (i, b) in s.iter().enumerate() {
        let n = b.dim();
        log_det += n as f64 * c[i].ln() + b.trace();
        grads.push(p.pullback_normalized(i, &inv.block(offsets[i], n)));
    }
    log_det.is_finite().then_some(LogDetM { log_det, grads, normalized })
}

fn barrier_stages(mu_start: f64, mu_end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut mu = mu_start;
    while mu > mu_end {
        out.push(mu);
        mu *= 0.5;
    }
    out.push(mu_end);
    out
}

struct StartResult {
    objective: f64,
    s: Vec<SymmetricMatrix>,
    converged: bool,
    gradient_norm: f64,
    trace: Vec<TraceEntry>,
}

enum StartOutcome {
    Done(StartResult),
    Unbounded(f64),
    Infeasible,
}

fn kw_single_start(datum: &BLDatum, opts: &KwOptions, index: usize) -> StartOutcome {
    let Some(s0) = feasible_start(datum, opts.seed, index) else {
        return StartOutcome::Infeasible;
    };
    let chart = Chart::new(datum.dims());
    let c = datum.exponents().to_vec();
    let kw_objective = |s: &[SymmetricMatrix]| -> f64 {
        -s.iter().zip(&c).map(|(b, ci)| ci * b.trace()).sum::<f64>()
    };
    let mut x = chart.pack(&s0);
    let mut h = None;
    let mut trace = Vec::new();
    let mut last: Option<BfgsOutcome> = None;
    for (stage, &mu) in barrier_stages(opts.mu_start, opts.mu_end).iter().enumerate() {
        let mut objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
            let s = chart.unpack(x);
            let p = ExpPoint::new(&s)?;
            let l = log_det_m(datum, &s, &p)?;
            let f = -kw_objective(&s) - mu * l.log_det;
            let grads: Vec<SymmetricMatrix> = l
                .grads
                .iter()
                .zip(&c)
                .map(|(g, ci)| g.affine(-mu, *ci))
                .collect();
            Some((f, chart.pack(&grads)))
        };
        let mut monitor = |x: &[f64], _f: f64| {
            let s = chart.unpack(x);
            let j = kw_objective(&s);
            j > opts.unbounded_threshold || (j > 0.0 && escaped(&s))
        };
        let bopts = BfgsOptions { gtol: opts.gtol, max_iter: opts.max_iter, max_step: MAX_STEP };
        let Some(out) = bfgs(&mut objective, x.clone(), h.take(), bopts, &mut monitor) else {
            return StartOutcome::Infeasible;
        };
        let j = kw_objective(&chart.unpack(&out.x));
        trace.push(TraceEntry {
            start: index,
            stage,
            mu,
            objective: j,
            gradient_norm: out.grad_norm,
            iterations: out.iterations,
        });
        if out.interrupted || j > opts.unbounded_threshold || (j > 0.0 && escaped(&chart.unpack(&out.x))) {
            return StartOutcome::Unbounded(j);
        }
        x = out.x.clone();
        h = Some(out.h.clone());
        last = Some(out);
    }
    let out = last.expect("at least one stage");
    let s = chart.unpack(&out.x);
    StartOutcome::Done(StartResult {
        objective: kw_objective(&s),
        s,
        converged: out.converged,
        gradient_norm: out.grad_norm,
        trace,
    })
}

fn exp_tuple(s: &[SymmetricMatrix]) -> GaussianTuple {
    let blocks = s.iter().map(|b| b.map_spectrum(f64::exp).expect("finite chart point")).collect();
    GaussianTuple::new(blocks, Convention::Precision).expect("exponentials are PD")
}

/// Maximizes `Σ cᵢ(−log det Aᵢ)` over `M(A) ⪰ 0` with a vanishing log-det
/// barrier, quasi-Newton ascent in the chart `Aᵢ = exp(Sᵢ)`, and seeded
/// multistart. Ties between starts go to the lowest start index.
pub fn optimize_kw_constant(datum: &BLDatum, opts: &KwOptions) -> Result<OptimizationResult> {
    if opts.starts == 0 {
        return Err(Error::InvalidInput("starts must be at least 1".into()));
    }
    let outcomes: Vec<StartOutcome> =
        (0..opts.starts).into_par_iter().map(|i| kw_single_start(datum, opts, i)).collect();
    let mut best: Option<(usize, StartResult)> = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            StartOutcome::Unbounded(v) => return Err(Error::Unbounded { value: v }),
            StartOutcome::Infeasible => {}
            StartOutcome::Done(r) => {
                if best.as_ref().map_or(true, |(_, b)| r.objective > b.objective) {
                    best = Some((i, r));
                }
            }
        }
    }
    let Some((best_start, r)) = best else {
        return Err(Error::Infeasible("no start reached the interior of M(A) ≻ 0".into()));
    };
    let argopt = exp_tuple(&r.s);
    let mut residuals = if datum.is_kw_shaped() {
        stationarity_residuals(datum, &argopt)?
    } else {
        BTreeMap::new()
    };
    residuals.insert("gradient_norm".into(), r.gradient_norm);
    residuals.insert("gaussian_constant".into(), kw_gaussian_constant(datum, r.objective));
    Ok(OptimizationResult {
        best_value: r.objective,
        log_value: Some(r.objective),
        argopt,
        residuals,
        starts_used: opts.starts,
        converged: r.converged,
        gradient_norm: r.gradient_norm,
        extremum: Extremum::Attained,
        best_start,
        trace: r.trace,
    })
}

/// Which extremum of `BL(A)` to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Inf,
    Sup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseOptions {
    pub starts: usize,
    pub seed: u64,
    pub gtol: f64,
    pub max_iter: usize,
    /// Iterates with `max |λ(log Aᵢ)|` above this are taken to escape to infinity.
    pub asymptotic_log_scale: f64,
    /// `λ_min/λ_max` of `I − D^{-1/2}·2Q·D^{-1/2}` (`D = ⊕cᵢAᵢ`) below which
    /// the iterate is on the boundary of the domain.
    pub boundary_ratio: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            seed: 0,
            gtol: 1e-9,
            max_iter: 5000,
            asymptotic_log_scale: 8.0,
            boundary_ratio: 1e-12,
        }
    }
}

struct InverseStart {
    log_value: f64,
    s: Vec<SymmetricMatrix>,
    extremum: Extremum,
    converged: bool,
    gradient_norm: f64,
    trace: TraceEntry,
}

fn log_bl_with_gradient(
    datum: &BLDatum,
    chart: &Chart,
    x: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let s = chart.unpack(x);
    let p = ExpPoint::new(&s)?;
    let l = log_det_m(datum, &s, &p)?;
    let c = datum.exponents();
    let constant = 0.5 * (datum.total_dim() as f64 - weighted_dim(datum)) * (2.0 * std::f64::consts::PI).ln();
    let v = constant - 0.5 * l.log_det
        + s.iter().zip(c).map(|(b, ci)| 0.5 * ci * b.trace()).sum::<f64>();
    let grads: Vec<SymmetricMatrix> =
        l.grads.iter().zip(c).map(|(g, ci)| g.affine(-0.5, 0.5 * ci)).collect();
    Some((v, chart.pack(&grads)))
}

/// `λ_min/λ_max` of the normalized matrix `I − D^{-1/2}·2Q·D^{-1/2}`.
fn boundary_ratio(datum: &BLDatum, s: &[SymmetricMatrix]) -> f64 {
    let Some(p) = ExpPoint::new(s) else { return 0.0 };
    let Some(l) = log_det_m(datum, s, &p) else { return 0.0 };
    match sym_eigen(&l.normalized) {
        Ok(e) => e.eigenvalues[0] / e.eigenvalues.last().unwrap().abs().max(f64::MIN_POSITIVE),
        Err(_) => 0.0,
    }
}

fn inverse_single_start(
    datum: &BLDatum,
    direction: Direction,
    opts: &InverseOptions,
    index: usize,
) -> Option<InverseStart> {
    let s0 = feasible_start(datum, opts.seed, index)?;
    let chart = Chart::new(datum.dims());
    let sign = match direction {
        Direction::Inf => 1.0,
        Direction::Sup => -1.0,
    };
    let mut objective = |x: &[f64]| {
        let (v, g) = log_bl_with_gradient(datum, &chart, x)?;
        Some((sign * v, g.into_iter().map(|gi| sign * gi).collect()))
    };
    let escape = 5.0 * opts.asymptotic_log_scale;
    let mut monitor = |x: &[f64], _f: f64| {
        let s = chart.unpack(x);
        let scale = ExpPoint::new(&s).map_or(f64::INFINITY, |p| p.log_scale());
        scale > escape
            || (direction == Direction::Sup && boundary_ratio(datum, &s) < opts.boundary_ratio)
    };
    let bopts = BfgsOptions { gtol: opts.gtol, max_iter: opts.max_iter, max_step: MAX_STEP };
    let out = bfgs(&mut objective, chart.pack(&s0), None, bopts, &mut monitor)?;
    let s = chart.unpack(&out.x);
    let scale = ExpPoint::new(&s)?.log_scale();
    let near_boundary = boundary_ratio(datum, &s) < opts.boundary_ratio.sqrt();
    let extremum = match direction {
        Direction::Sup if out.interrupted || (!out.converged && (near_boundary || scale > opts.asymptotic_log_scale)) => {
            Extremum::Divergent
        }
        Direction::Sup if scale > opts.asymptotic_log_scale => Extremum::Divergent,
        Direction::Inf if out.interrupted || scale > opts.asymptotic_log_scale => Extremum::Asymptotic,
        _ => Extremum::Attained,
    };
    let log_value = sign * out.f;
    Some(InverseStart {
        log_value,
        s,
        extremum,
        converged: out.converged,
        gradient_norm: out.grad_norm,
        trace: TraceEntry {
            start: index,
            stage: 0,
            mu: 0.0,
            objective: log_value,
            gradient_norm: out.grad_norm,
            iterations: out.iterations,
        },
    })
}

/// Infimum or supremum of `BL(A)` over precision tuples with `M(A) ≻ 0`.
///
/// The value is reported together with whether it is attained, only approached
/// as the tuple escapes to infinity, or divergent (`+∞`).
pub fn optimize_inverse_constant(
    datum: &BLDatum,
    direction: Direction,
    opts: &InverseOptions,
) -> Result<OptimizationResult> {
    if opts.starts == 0 {
        return Err(Error::InvalidInput("starts must be at least 1".into()));
    }
    let outcomes: Vec<Option<InverseStart>> = (0..opts.starts)
        .into_par_iter()
        .map(|i| inverse_single_start(datum, direction, opts, i))
        .collect();
    let mut best: Option<(usize, InverseStart)> = None;
    let mut trace = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        let Some(r) = o else { continue };
        trace.push(r.trace.clone());
        let better = match &best {
            None => true,
            Some((_, b)) => match direction {
                Direction::Inf => r.log_value < b.log_value,
                Direction::Sup => {
                    (r.extremum == Extremum::Divergent && b.extremum != Extremum::Divergent)
                        || (b.extremum != Extremum::Divergent && r.log_value > b.log_value)
                }
            },
        };
        if better {
            best = Some((i, r));
        }
    }
    let Some((best_start, r)) = best else {
        return Err(Error::Infeasible("no start reached the interior of M(A) ≻ 0".into()));
    };
    let (best_value, log_value) = if r.extremum == Extremum::Divergent {
        (f64::INFINITY, None)
    } else {
        (r.log_value.exp(), Some(r.log_value))
    };
    let mut residuals = BTreeMap::new();
    residuals.insert("gradient_norm".into(), r.gradient_norm);
    Ok(OptimizationResult {
        best_value,
        log_value,
        argopt: exp_tuple(&r.s),
        residuals,
        starts_used: opts.starts,
        converged: r.converged,
        gradient_norm: r.gradient_norm,
        extremum: r.extremum,
        best_start,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PLimitPoint {
    pub p: f64,
    /// `log I_G` of the scaled datum (infimum direction).
    pub log_infimum: f64,
    /// `I_G^{-p}`.
    pub value: f64,
    /// `|value − target| / target`.
    pub relative_gap: f64,
    pub extremum: Extremum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PLimitReport {
    /// `(2π)^{Σcᵢnᵢ/2}` of the base datum, the KW constant at the identity.
    pub target: f64,
    pub points: Vec<PLimitPoint>,
}

impl PLimitReport {
    pub fn final_gap(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.relative_gap)
    }
}

/// `I_G(n, c(p), Q_p)^{-p}` along a sequence of `p`, compared with the Gaussian
/// constant of the base datum.
pub fn p_limit(base: &BLDatum, p_values: &[f64], opts: &InverseOptions) -> Result<PLimitReport> {
    let target = kw_gaussian_constant(base, 0.0);
    let mut points = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let datum = super::scaled_datum(base, p)?;
        let r = optimize_inverse_constant(&datum, Direction::Inf, opts)?;
        let log_infimum = r.log_value.unwrap_or(f64::NEG_INFINITY);
        let value = (-p * log_infimum).exp();
        points.push(PLimitPoint {
            p,
            log_infimum,
            value,
            relative_gap: (value - target).abs() / target,
            extremum: r.extremum,
        });
    }
    Ok(PLimitReport { target, points })
}

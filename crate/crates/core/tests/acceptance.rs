//! One line per acceptance criterion; exits nonzero if any fails.
//! Run with `cargo test --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use blsat_core::functional::{ball_monotonicity_check, bl_functional_grid, clt_experiment, convolution_logconcavity_check};
use blsat_core::gaussian_bl::{
    assemble_m, bl_gaussian_value, bs_datum, gaussian_feasible, kw_datum, kw_gaussian_constant,
    kw_gaussian_objective, optimize_inverse_constant, optimize_kw_constant, p_limit, prop52_check,
    scaled_datum, Convention, Direction, GaussianTuple, InverseOptions, KwOptions,
};
use blsat_core::grid::{affine_surface_area_grid, affine_surface_area_quadratic, volume_product};
use blsat_core::matrix::inverse_spd;
use blsat_core::sampling::{random_spd, rng_for};
use blsat_core::transport::{
    barycenter_fixed_point, deficit_lower_bound, minimize_deficit, talagrand_deficit, BarycenterOptions,
    DeficitMinOptions,
};
use blsat_core::{GridFunction, SymmetricMatrix};
use common::*;
use rand::RngExt;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_quadrature() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let datum = if case < 10 { bs_datum(1).unwrap() } else { kw_datum(3, 1).unwrap() };
        let m = datum.len();
        let mut rng = rng_for(2024, case);
        let w: Vec<SymmetricMatrix> =
            (0..m).map(|_| SymmetricMatrix::scalar(1, rng.random_range(-0.7f64..0.7).exp())).collect();
        let t = boundary_scale(&datum, &w) * rng.random_range(1.5..3.0);
        let a = GaussianTuple::new(w.iter().map(|b| b.scale(t)).collect(), Convention::Precision).unwrap();
        let mm = assemble_m(&datum, &a).unwrap();
        let cov = inverse_spd(&mm).unwrap();
        let points = if m == 2 { 401 } else { 201 };
        let fs: Vec<GridFunction> = (0..m)
            .map(|i| {
                let ai = a.blocks()[i].get(0, 0);
                gauss(ai, 9.0 * cov.get(i, i).max(1.0 / ai).sqrt(), points)
            })
            .collect();
        let exact = bl_gaussian_value(&datum, &a).unwrap();
        let q = bl_functional_grid(&datum, &fs).unwrap();
        worst = worst.max((q.value - exact).abs() / exact);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-6 && secs < 30.0, format!("max relative error {worst:.2e} (tol 1e-6), {secs:.1}s (limit 30s)"))
}

fn c2_kw_constant() -> Outcome {
    let mut worst_obj: f64 = 0.0;
    let mut worst_dist: f64 = 0.0;
    let mut worst_sample = f64::NEG_INFINITY;
    for m in 3..=5 {
        for n in 1..=3 {
            let datum = kw_datum(m, n).unwrap();
            let r = optimize_kw_constant(&datum, &KwOptions { seed: 7, ..Default::default() }).unwrap();
            worst_obj = worst_obj.max(r.best_value.abs());
            worst_dist = worst_dist.max(r.argopt.distance_to_identity());
            let mut rng = rng_for(99, (m * 10 + n) as u64);
            for k in 0..10_000 {
                // Half on the boundary, half strictly inside.
                let factor = if k % 2 == 0 { 1.0 } else { 1.0 + rng.random_range(0.0..2.0) };
                let a = scaled_sample(&datum, &mut rng, factor);
                worst_sample = worst_sample.max(kw_gaussian_objective(&datum, &a).unwrap());
            }
        }
    }
    outcome(
        worst_obj <= 1e-6 && worst_dist <= 1e-4 && worst_sample <= 1e-9,
        format!(
            "max |log-objective| {worst_obj:.2e} (tol 1e-6), max argmax distance {worst_dist:.2e} (tol 1e-4), \
             max sampled objective {worst_sample:.2e} (tol 1e-9)"
        ),
    )
}

fn c3_bs_family() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut all_feasible = true;
    for k in 0..100u64 {
        let n = 1 + (k % 3) as usize;
        let datum = bs_datum(n).unwrap();
        let a = random_spd(&mut rng_for(303, k), n, 0.05, 20.0);
        let tuple = GaussianTuple::new(vec![a.clone(), inverse_spd(&a).unwrap()], Convention::Precision).unwrap();
        worst = worst.max(kw_gaussian_objective(&datum, &tuple).unwrap().abs());
        all_feasible &= gaussian_feasible(&datum, &tuple, 1e-9).unwrap();
    }
    let mut worst_const: f64 = 0.0;
    for n in 1..=3 {
        let target = TWO_PI.powi(n as i32);
        let c = kw_gaussian_constant(&bs_datum(n).unwrap(), 0.0);
        worst_const = worst_const.max((c - target).abs() / target);
    }
    outcome(
        worst <= 1e-10 && all_feasible && worst_const <= 4.0 * f64::EPSILON,
        format!(
            "max |objective| on (A, A^-1) {worst:.2e} (tol 1e-10), all feasible {all_feasible}, \
             constant vs (2pi)^n relative {worst_const:.1e}"
        ),
    )
}

fn c4_abcm() -> Outcome {
    let mut worst_drop = f64::NEG_INFINITY;
    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_res: f64 = 0.0;
    let mut worst_1d: f64 = 0.0;
    for k in 0..500u64 {
        let m = 2 + (k % 3) as usize;
        let n = 1 + ((k / 3) % 4) as usize;
        let mut rng = rng_for(404, k);
        let blocks: Vec<SymmetricMatrix> = (0..m).map(|_| random_spd(&mut rng, n, 0.1, 10.0)).collect();
        let covs = GaussianTuple::new(blocks.clone(), Convention::Covariance).unwrap();
        let r = barycenter_fixed_point(&covs, &BarycenterOptions::default()).unwrap();
        for w in r.trace_sequence.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        let mean_trace = blocks.iter().map(|b| b.trace()).sum::<f64>() / m as f64;
        worst_bound = worst_bound.max(r.a0.trace() - mean_trace);
        worst_res = worst_res.max(r.fixed_point_residual);
        if n == 1 {
            let expect = (blocks.iter().map(|b| b.get(0, 0).sqrt()).sum::<f64>() / m as f64).powi(2);
            worst_1d = worst_1d.max((r.a0.get(0, 0) - expect).abs());
        }
    }
    outcome(
        worst_drop <= 1e-12 && worst_bound <= 1e-12 && worst_res <= 1e-10 && worst_1d <= 1e-10,
        format!(
            "max trace drop {worst_drop:.2e}, max Tr A0 - mean Tr Ai {worst_bound:.2e} (tol 1e-12), \
             max residual {worst_res:.2e} (tol 1e-10), 1-D error {worst_1d:.2e} (tol 1e-10)"
        ),
    )
}

fn c5_talagrand() -> Outcome {
    let opts = BarycenterOptions::default();
    let mut min_deficit = f64::INFINITY;
    let mut worst_gap = f64::NEG_INFINITY;
    for k in 0..1000u64 {
        let m = 2 + (k % 3) as usize;
        let n = 1 + ((k / 3) % 3) as usize;
        let mut rng = rng_for(505, k);
        let blocks: Vec<SymmetricMatrix> = (0..m).map(|_| random_spd(&mut rng, n, 0.1, 10.0)).collect();
        let covs = GaussianTuple::new(blocks, Convention::Covariance).unwrap();
        let d = talagrand_deficit(&covs, &opts).unwrap().deficit;
        min_deficit = min_deficit.min(d);
        worst_gap = worst_gap.max(deficit_lower_bound(&covs).unwrap() - d);
    }
    let mut identity_max: f64 = 0.0;
    for m in 2..=4 {
        for n in 1..=3 {
            let d = talagrand_deficit(&GaussianTuple::identity(m, n, Convention::Covariance), &opts).unwrap();
            identity_max = identity_max.max(d.deficit.abs());
        }
    }
    outcome(
        min_deficit >= -1e-9 && identity_max == 0.0 && worst_gap <= 1e-9,
        format!(
            "min deficit {min_deficit:.2e} (tol -1e-9), identity deficit {identity_max:.1e}, \
             max bound - deficit {worst_gap:.2e} (tol 1e-9)"
        ),
    )
}

fn c6_deficit_min() -> Outcome {
    let mut worst_min: f64 = 0.0;
    let mut worst_dist: f64 = 0.0;
    for n in 1..=2 {
        let r = minimize_deficit(3, n, &DeficitMinOptions { starts: 16, seed: 11, ..Default::default() }).unwrap();
        worst_min = worst_min.max(r.best_value.abs());
        worst_dist = worst_dist.max(r.argopt.distance_to_identity());
    }
    let mut worst_flat: f64 = 0.0;
    for a in [0.5, 1.0, 2.0, 4.0] {
        let covs = GaussianTuple::scalars(&[a, 1.0 / a], Convention::Covariance).unwrap();
        worst_flat = worst_flat.max(talagrand_deficit(&covs, &BarycenterOptions::default()).unwrap().deficit.abs());
    }
    outcome(
        worst_min <= 1e-7 && worst_dist <= 1e-3 && worst_flat <= 1e-10,
        format!(
            "m=3 min |deficit| {worst_min:.2e} (tol 1e-7), argmin distance {worst_dist:.2e} (tol 1e-3), \
             flat family max |deficit| {worst_flat:.2e} (tol 1e-10)"
        ),
    )
}

fn c7_prop52() -> Outcome {
    let mut min_family_distance = f64::INFINITY;
    let mut family_ok = true;
    let mut worst_power: f64 = 0.0;
    for a in [0.05, 0.1, 0.2, 0.3, 0.35] {
        let x = vec![SymmetricMatrix::diagonal(&[a, 1.0 - a]), SymmetricMatrix::diagonal(&[1.0 - a, a])];
        let r = prop52_check(&x, 1e-12).unwrap();
        family_ok &= r.constraints_hold(1e-12);
        min_family_distance = min_family_distance.min(r.distance);
        worst_power = worst_power.max(r.power_identity_residual.unwrap_or(f64::INFINITY));
    }
    let (mut solutions, mut worst_search_distance) = (0usize, 0.0f64);
    for m in [3, 4] {
        for n in [1, 2] {
            for trial in 0..200u64 {
                let (x, _) = prop52_search(m, n, 707 + (10 * m + n) as u64, trial);
                if prop52_solution(&x, 1e-8) {
                    solutions += 1;
                    let r = prop52_check(&x, 1e-8).unwrap();
                    worst_search_distance = worst_search_distance.max(r.distance);
                    if let Some(p) = r.power_identity_residual {
                        worst_power = worst_power.max(p);
                    }
                }
            }
        }
    }
    outcome(
        family_ok && min_family_distance >= 0.1 && worst_search_distance <= 1e-6 && worst_power <= 1e-10,
        format!(
            "m=2 family holds {family_ok} with min distance {min_family_distance:.2} (need >= 0.1); \
             {solutions} search solutions, max distance to id/m {worst_search_distance:.2e} (tol 1e-6); \
             max power-identity defect {worst_power:.2e} (tol 1e-10)"
        ),
    )
}

fn c8_volume() -> Outcome {
    let vg = volume_product(&gauss(1.0, 8.0, 801), None).unwrap();
    let ve = volume_product(&GridFunction::exp_norm(1, 30.0, 3001).unwrap(), None).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_name = "";
    for (name, f, dual) in volume_fixtures() {
        let v = volume_product(&f, dual).unwrap();
        if v > worst {
            worst = v;
            worst_name = name;
        }
    }
    outcome(
        (vg - TWO_PI).abs() <= 1e-5 && (ve - 4.0).abs() <= 1e-3 && worst <= TWO_PI + 1e-3,
        format!(
            "v(gaussian) - 2pi = {:.2e} (tol 1e-5), v(e^-|x|) - 4 = {:.2e} (tol 1e-3), \
             fixture max {worst:.6} at {worst_name} (limit 2pi + 1e-3)",
            vg - TWO_PI,
            ve - 4.0
        ),
    )
}

fn c9_monotonicity() -> Outcome {
    let bs = scaled_datum(&bs_datum(1).unwrap(), 1.0).unwrap();
    let kw = scaled_datum(&kw_datum(3, 1).unwrap(), 1.0).unwrap();
    let opts = InverseOptions { seed: 1, ..Default::default() };
    let bs_inf = optimize_inverse_constant(&bs, Direction::Inf, &opts).unwrap();
    let kw_inf = optimize_inverse_constant(&kw, Direction::Inf, &opts).unwrap();

    let quartic = potential(8.0, 401, |x| 0.5 * x * x + 0.05 * x.powi(4));
    let cosh = potential(8.0, 401, |x| x.cosh().ln() + 0.25 * x * x);
    let bs_suite = vec![
        vec![quartic.clone(), quartic.clone()],
        vec![cosh.clone(), quartic.clone()],
        vec![gauss(0.5, 10.0, 401), gauss(1.2, 10.0, 401)],
        vec![potential(10.0, 401, |x| x.abs() + 0.5 * x * x), gauss(1.0, 10.0, 401)],
    ];
    let quartic_k = potential(8.0, 201, |x| 0.5 * x * x + 0.05 * x.powi(4));
    let cosh_k = potential(8.0, 201, |x| x.cosh().ln() + 0.25 * x * x);
    let kw_suite = vec![
        vec![quartic_k.clone(), cosh_k.clone(), gauss(2.0, 8.0, 201)],
        vec![gauss(0.7, 8.0, 201), gauss(1.5, 8.0, 201), quartic_k.clone()],
    ];
    let mut min_margin = f64::INFINITY;
    for fs in &bs_suite {
        min_margin = min_margin.min(ball_monotonicity_check(&bs, fs, bs_inf.best_value).unwrap().margin);
    }
    for fs in &kw_suite {
        min_margin = min_margin.min(ball_monotonicity_check(&kw, fs, kw_inf.best_value).unwrap().margin);
    }

    let mut worst_eq: f64 = 0.0;
    let s = 0.5f64.sqrt();
    for pair in [[s, s], [1.0, 0.5]] {
        let fs = vec![gauss(pair[0], 12.0, 401), gauss(pair[1], 12.0, 401)];
        worst_eq = worst_eq.max(ball_monotonicity_check(&bs, &fs, bs_inf.best_value).unwrap().margin.abs());
    }
    let fs: Vec<GridFunction> = kw_inf.argopt.blocks().iter().map(|b| gauss(b.get(0, 0), 10.0, 201)).collect();
    worst_eq = worst_eq.max(ball_monotonicity_check(&kw, &fs, kw_inf.best_value).unwrap().margin.abs());
    outcome(
        min_margin >= -1e-6 && worst_eq <= 1e-6,
        format!("min margin {min_margin:.2e} (tol -1e-6), max |margin| at Gaussian minimizers {worst_eq:.2e} (tol 1e-6)"),
    )
}

fn c10_clt() -> Outcome {
    let mut monotone = true;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut uniform_final = f64::NAN;
    for (name, f) in clt_fixtures() {
        let r = clt_experiment(&f, 6).unwrap();
        for w in r.windows(2) {
            let rise = w[1].l1_to_gaussian - w[0].l1_to_gaussian;
            worst_rise = worst_rise.max(rise);
            // Absolute slack for rounding: the Gaussian fixture sits at ~1e-14.
            monotone &= rise <= 1e-12;
        }
        if name == "uniform" {
            uniform_final = r[6].l1_to_gaussian;
        }
    }
    outcome(
        monotone && uniform_final <= 1e-3,
        format!(
            "nonincreasing on all fixtures {monotone} (max step change {worst_rise:.2e}); \
             uniform L1 at step 6 {uniform_final:.3e} (tol 1e-3)"
        ),
    )
}

fn c11_regularity() -> Outcome {
    let mut all_ok = true;
    let mut worst_slack = f64::INFINITY;
    let values = [0.5, 1.0, 2.0, 4.0];
    for &l1 in &values {
        for &l2 in &values {
            let f1 = potential(10.0, 801, |x| 0.5 * l1 * x * x + 0.01 * x.powi(4));
            let f2 = potential(10.0, 801, |x| 0.5 * l2 * x * x + 0.01 * x.powi(4));
            let r = convolution_logconcavity_check(&f1, &f2).unwrap();
            all_ok &= r.lambda_ok;
            worst_slack = worst_slack.min(r.lambda_out - (r.lambda_bound - r.tolerance));
        }
    }
    outcome(all_ok, format!("16 pairs, min lambda_out - (bound - 10h^2) = {worst_slack:.2e}"))
}

fn c12_surface_area() -> Outcome {
    let mut worst_exact: f64 = 0.0;
    for (m, n) in [(2i32, 1usize), (3, 1), (3, 2), (4, 3)] {
        for lambda in [0.0, 0.25, 0.5, 1.0] {
            let per = affine_surface_area_quadratic(&SymmetricMatrix::identity(n), lambda).unwrap();
            let product = per.powi(m);
            let target = TWO_PI.powf(0.5 * (n as i32 * m) as f64);
            worst_exact = worst_exact.max((product - target).abs() / target);
        }
    }
    let mut worst_grid: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        let v = GridFunction::new(1, 12.0, 2401, (0..2401).map(|i| 0.5 * a * (-12.0 + i as f64 * 0.01f64).powi(2)).collect())
            .unwrap();
        for lambda in [0.0, 0.25, 0.5, 1.0] {
            let q = affine_surface_area_quadratic(&SymmetricMatrix::scalar(1, a), lambda).unwrap();
            let g = affine_surface_area_grid(&v, lambda).unwrap();
            worst_grid = worst_grid.max((g - q).abs() / q);
        }
    }
    outcome(
        worst_exact <= 1e-14 && worst_grid <= 1e-4,
        format!("identity product vs (2pi)^(nm/2) relative {worst_exact:.1e}, grid vs quadratic relative {worst_grid:.2e} (tol 1e-4)"),
    )
}

fn c13_p_limit() -> Outcome {
    let ps = [0.5, 0.2, 0.1, 0.05, 0.02];
    let r = p_limit(&kw_datum(3, 1).unwrap(), &ps, &InverseOptions { seed: 3, ..Default::default() }).unwrap();
    let gaps: Vec<String> = r.points.iter().map(|p| format!("p={} gap {:.3}", p.p, p.relative_gap)).collect();
    let final_gap = r.final_gap();
    outcome(final_gap <= 0.02, format!("{} (final tol 0.02)", gaps.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("closed form vs quadrature", c1_quadrature),
        ("KW constant", c2_kw_constant),
        ("Blaschke-Santalo family", c3_bs_family),
        ("barycenter trace bounds", c4_abcm),
        ("barycentric Talagrand", c5_talagrand),
        ("deficit minimization", c6_deficit_min),
        ("commuting system", c7_prop52),
        ("volume product", c8_volume),
        ("self-convolution monotonicity", c9_monotonicity),
        ("CLT experiment", c10_clt),
        ("convolution regularity", c11_regularity),
        ("affine surface area", c12_surface_area),
        ("p-limit", c13_p_limit),
    ];
    let filter: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let index = k + 1;
        if filter.is_some_and(|f| f != index) {
            continue;
        }
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
            });
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {index:>2} {}: {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

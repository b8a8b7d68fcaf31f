//! Even functions `f = e^{−φ}` sampled on symmetric uniform grids in one or two
//! dimensions, with discrete Legendre transforms, polar functions and tuples,
//! volume products, affine surface areas and curvature profiles.
//!
//! `+∞` potentials are stored as `f64::INFINITY`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian_bl::BLDatum;
use crate::matrix::SymmetricMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    radius: f64,
    points: usize,
    potential: Vec<f64>,
}

impl GridFunction {
    /// Tabulated potential in row-major order. The values are averaged with
    /// their reflection `x ↦ −x`, so evenness holds exactly.
    pub fn new(dim: usize, radius: f64, points: usize, potential: Vec<f64>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidInput(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        if points < 3 || points % 2 == 0 {
            return Err(Error::InvalidInput(format!("points per axis must be odd and at least 3, got {points}")));
        }
        if potential.len() != points.pow(dim as u32) {
            return Err(Error::InvalidInput(format!(
                "expected {} potential values, got {}",
                points.pow(dim as u32),
                potential.len()
            )));
        }
        if potential.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidInput("potential values must be real or +inf".into()));
        }
        if potential.iter().all(|v| v.is_infinite()) {
            return Err(Error::InvalidInput("potential is +inf everywhere".into()));
        }
        let len = potential.len();
        let symmetric = (0..len)
            .map(|k| {
                let (a, b) = (potential[k], potential[len - 1 - k]);
                if a == b {
                    a
                } else {
                    0.5 * (a + b)
                }
            })
            .collect();
        Ok(Self { dim, radius, points, potential: symmetric })
    }

    /// Samples `φ` at every grid point.
    pub fn from_potential(
        dim: usize,
        radius: f64,
        points: usize,
        phi: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let shell = Self::new(dim, radius, points, vec![0.0; points.pow(dim as u32)])?;
        let potential = (0..shell.len()).map(|k| phi(&shell.point(k))).collect();
        Self::new(dim, radius, points, potential)
    }

    /// `g_A = e^{−½⟨x,Ax⟩}` for a PD `A` of size 1 or 2.
    pub fn gaussian(a: &SymmetricMatrix, radius: f64, points: usize) -> Result<Self> {
        if a.min_eigenvalue()? <= 0.0 {
            return Err(Error::NotPositiveDefinite { eigenvalue: a.min_eigenvalue()? });
        }
        if a.dim() > 2 {
            return Err(Error::InvalidInput("grid functions live in one or two dimensions".into()));
        }
        Self::from_potential(a.dim(), radius, points, |x| 0.5 * quadratic_form(a, x))
    }

    /// `φ(x) = |x|`.
    pub fn exp_norm(dim: usize, radius: f64, points: usize) -> Result<Self> {
        Self::from_potential(dim, radius, points, norm)
    }

    /// `φ(x) = ½a|x|² + ε|x|⁴`.
    pub fn quartic(dim: usize, radius: f64, points: usize, a: f64, eps: f64) -> Result<Self> {
        if a < 0.0 || eps < 0.0 {
            return Err(Error::InvalidInput("quartic coefficients must be nonnegative".into()));
        }
        Self::from_potential(dim, radius, points, |x| {
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            0.5 * a * r2 + eps * r2 * r2
        })
    }

    /// Indicator of the box `[−w, w]^dim`: `φ = 0` inside, `+∞` outside.
    pub fn indicator(dim: usize, half_width: f64, radius: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidInput("indicator half-width must be positive".into()));
        }
        let slack = 1e-9 * half_width;
        Self::from_potential(dim, radius, points, |x| {
            if x.iter().all(|v| v.abs() <= half_width + slack) {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.points - 1) as f64
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    /// Coordinate of index `i` along an axis; exactly antisymmetric in `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - ((self.points - 1) / 2) as f64) * self.spacing()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coordinate(i)).collect()
    }

    /// Coordinates of the point with row-major index `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.coordinate(k)],
            _ => vec![self.coordinate(k / self.points), self.coordinate(k % self.points)],
        }
    }

    /// `e^{−φ}`, with `0` at `+∞`.
    pub fn density(&self) -> Vec<f64> {
        self.potential.iter().map(|p| (-p).exp()).collect()
    }

    /// Trapezoid weight of point `k` on the sub-grid of every `stride`-th
    /// point. Along each axis the weight is halved at the ends of the grid and
    /// next to a `+∞` point, so the rule is the trapezoid rule on the support.
    pub(crate) fn weight_strided(&self, k: usize, stride: usize) -> f64 {
        let n = self.points;
        let h = self.spacing() * stride as f64;
        let (row, col) = match self.dim {
            1 => (0, k),
            _ => (k / n, k % n),
        };
        let at = |r: usize, c: usize| self.potential[if self.dim == 1 { c } else { r * n + c }];
        let axis = |i: usize, neighbour: &dyn Fn(usize) -> f64| {
            if i < stride || i + stride >= n {
                0.5 * h
            } else if neighbour(i - stride) == f64::INFINITY || neighbour(i + stride) == f64::INFINITY {
                0.5 * h
            } else {
                h
            }
        };
        let w = axis(col, &|c| at(row, c));
        match self.dim {
            1 => w,
            _ => w * axis(row, &|r| at(r, col)),
        }
    }

    fn weight(&self, k: usize) -> f64 {
        self.weight_strided(k, 1)
    }

    /// Trapezoid value of `∫ e^{−φ}`; `+∞` points contribute nothing.
    pub fn integral(&self) -> f64 {
        self.trapezoid(|_, f| f)
    }

    fn trapezoid(&self, g: impl Fn(usize, f64) -> f64) -> f64 {
        self.potential
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let f = (-p).exp();
                if f == 0.0 {
                    0.0
                } else {
                    g(k, f) * self.weight(k)
                }
            })
            .sum()
    }

    /// Trapezoid value of `∫ |x|² e^{−φ} / ∫ e^{−φ}`.
    pub fn second_moment(&self) -> f64 {
        let m2 = self.trapezoid(|k, f| f * self.point(k).iter().map(|x| x * x).sum::<f64>());
        m2 / self.integral()
    }

    /// `log ∫ e^{−φ}` by trapezoid, computed without underflow. `stride = 2`
    /// uses every other point (spacing `2h`).
    pub(crate) fn log_integral_strided(&self, stride: usize) -> f64 {
        let n = self.points;
        let keep = |i: usize| i % stride == 0;
        let shift = self.potential.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (k, p) in self.potential.iter().enumerate() {
            let kept = match self.dim {
                1 => keep(k),
                _ => keep(k / n) && keep(k % n),
            };
            if kept && p.is_finite() {
                total += self.weight_strided(k, stride) * (shift - p).exp();
            }
        }
        total.ln() - shift
    }

    /// Same function scaled to unit trapezoid mass.
    pub fn normalized(&self) -> Result<Self> {
        let mass = self.integral();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidInput(format!("cannot normalize a function of mass {mass}")));
        }
        let shift = mass.ln();
        Ok(Self { potential: self.potential.iter().map(|p| p + shift).collect(), ..self.clone() })
    }

    /// Largest finite-difference slope `|φ(x + h e_k) − φ(x)|/h` over adjacent
    /// finite points.
    pub fn max_slope(&self) -> f64 {
        let h = self.spacing();
        let n = self.points;
        let mut slope: f64 = 0.0;
        let mut visit = |a: f64, b: f64| {
            if a.is_finite() && b.is_finite() {
                slope = slope.max((a - b).abs() / h);
            }
        };
        match self.dim {
            1 => self.potential.windows(2).for_each(|w| visit(w[0], w[1])),
            _ => {
                for i in 0..n {
                    for j in 0..n {
                        let here = self.potential[i * n + j];
                        if j + 1 < n {
                            visit(here, self.potential[i * n + j + 1]);
                        }
                        if i + 1 < n {
                            visit(here, self.potential[(i + 1) * n + j]);
                        }
                    }
                }
            }
        }
        slope
    }

    /// Default radius of the dual grid: the largest slope plus one spacing,
    /// rounded up to the lattice of the primal spacing.
    pub fn default_dual_radius(&self) -> f64 {
        self.max_slope() + self.spacing()
    }

    /// Plain-text form: `dim`, `radius` and `points` header lines, then one
    /// `φ` value per line in row-major order, `inf` for `+∞`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dim {}", self.dim);
        let _ = writeln!(out, "radius {:?}", self.radius);
        let _ = writeln!(out, "points {}", self.points);
        for p in &self.potential {
            let _ = writeln!(out, "{}", fmt_value(*p));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidInput(format!("missing header line `{key}`")))?;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(k), Some(v), None) if k == key => Ok(v.to_string()),
                _ => Err(Error::InvalidInput(format!("expected `{key} <value>`, got `{line}`"))),
            }
        };
        let bad = |what: &str, v: &str| Error::InvalidInput(format!("invalid {what} `{v}`"));
        let dim_s = header("dim")?;
        let radius_s = header("radius")?;
        let points_s = header("points")?;
        let dim = dim_s.parse().map_err(|_| bad("dim", &dim_s))?;
        let radius = radius_s.parse().map_err(|_| bad("radius", &radius_s))?;
        let points = points_s.parse().map_err(|_| bad("points", &points_s))?;
        let potential = lines
            .map(|l| parse_value(l).ok_or_else(|| bad("potential value", l)))
            .collect::<Result<Vec<f64>>>()?;
        Self::new(dim, radius, points, potential)
    }

    pub(crate) fn same_grid(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.radius == other.radius
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `inf` for `+∞`, otherwise the shortest round-trip decimal.
pub fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:?}")
    }
}

fn parse_value(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        _ => s.parse().ok(),
    }
}

/// Relative margin by which a boundary maximizer must beat every interior
/// candidate for the transform to count as unresolved.
const BOUNDARY_TOL: f64 = 1e-10;

/// For each output coordinate `y`, `max_x (x·y + base(x))` over all `x` and over
/// the interior indices only.
fn conjugate_axis(xs: &[f64], base: &[f64], interior: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    let last = xs.len() - 1;
    ys.iter()
        .map(|&y| {
            let mut full = f64::NEG_INFINITY;
            let mut inner = f64::NEG_INFINITY;
            for (i, &x) in xs.iter().enumerate() {
                let b = base[i];
                if b > f64::NEG_INFINITY {
                    full = full.max(x * y + b);
                }
                let bi = interior[i];
                if i != 0 && i != last && bi > f64::NEG_INFINITY {
                    inner = inner.max(x * y + bi);
                }
            }
            (full, inner)
        })
        .collect()
}

/// Discrete transform on the dual grid; returns `(φ*, φ* restricted to interior
/// maximizers)`.
fn transform(f: &GridFunction, dual_radius: Option<f64>) -> Result<(GridFunction, Vec<f64>)> {
    let r_star = dual_radius.unwrap_or_else(|| f.default_dual_radius());
    if !(r_star > 0.0) || !r_star.is_finite() {
        return Err(Error::InvalidInput(format!("dual radius must be positive, got {r_star}")));
    }
    let h = f.spacing();
    let half = ((r_star / h) - 1e-9).ceil().max(1.0) as usize;
    let dual_points = 2 * half + 1;
    let dual_radius = half as f64 * h;
    let dual = GridFunction::new(f.dim, dual_radius, dual_points, vec![0.0; dual_points.pow(f.dim as u32)])?;
    let xs = f.coordinates();
    let ys = dual.coordinates();
    let neg: Vec<f64> = f.potential.iter().map(|p| -p).collect();
    let (full, resolved): (Vec<f64>, Vec<f64>) = match f.dim {
        1 => conjugate_axis(&xs, &neg, &neg, &ys).into_iter().unzip(),
        _ => {
            let n = f.points;
            // Inner pass along the second axis for every first-axis index.
            let rows: Vec<Vec<(f64, f64)>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let row = &neg[i * n..(i + 1) * n];
                    conjugate_axis(&xs, row, row, &ys)
                })
                .collect();
            let nd = dual_points;
            let cols: Vec<Vec<(f64, f64)>> = (0..nd)
                .into_par_iter()
                .map(|j| {
                    let base: Vec<f64> = rows.iter().map(|r| r[j].0).collect();
                    let interior: Vec<f64> = rows.iter().map(|r| r[j].1).collect();
                    conjugate_axis(&xs, &base, &interior, &ys)
                })
                .collect();
            let mut full = vec![0.0; nd * nd];
            let mut resolved = vec![0.0; nd * nd];
            for (j, col) in cols.iter().enumerate() {
                for (i, &(a, b)) in col.iter().enumerate() {
                    full[i * nd + j] = a;
                    resolved[i * nd + j] = b;
                }
            }
            (full, resolved)
        }
    };
    let out = GridFunction::new(f.dim, dual_radius, dual_points, full)?;
    Ok((out, resolved))
}

/// `φ*(y) = max_x ⟨x,y⟩ − φ(x)` over the grid, evaluated on a grid with the
/// same spacing and radius `dual_radius` rounded up to the lattice (default:
/// [`GridFunction::default_dual_radius`]).
pub fn legendre_transform(f: &GridFunction, dual_radius: Option<f64>) -> Result<GridFunction> {
    Ok(transform(f, dual_radius)?.0)
}

/// Potential of `f°(y) = inf_x e^{−⟨x,y⟩}/f(x)`, i.e. `φ*`, except that
/// points whose maximizer sits strictly on the edge of the grid are set to
/// `+∞`: there the supremum over the whole space is not resolved by the grid.
pub fn polar_function(f: &GridFunction, dual_radius: Option<f64>) -> Result<GridFunction> {
    let (out, resolved) = transform(f, dual_radius)?;
    let potential = out
        .potential
        .iter()
        .zip(&resolved)
        .map(|(&v, &r)| if v - r > BOUNDARY_TOL * (1.0 + v.abs()) { f64::INFINITY } else { v })
        .collect();
    GridFunction::new(out.dim, out.radius, out.points, potential)
}

/// `v(f) = ∫f · ∫f°` by trapezoid on the primal and dual grids.
pub fn volume_product(f: &GridFunction, dual_radius: Option<f64>) -> Result<f64> {
    let mass = f.integral();
    if !(mass > 0.0) {
        return Err(Error::InvalidInput("volume product of a function with zero mass".into()));
    }
    Ok(mass * polar_function(f, dual_radius)?.integral())
}

pub(crate) fn check_factors(datum: &BLDatum, fs: &[GridFunction]) -> Result<()> {
    if fs.len() != datum.len() {
        return Err(Error::InvalidInput(format!("expected {} functions, got {}", datum.len(), fs.len())));
    }
    for (f, &n) in fs.iter().zip(datum.dims()) {
        if f.dim != n {
            return Err(Error::InvalidInput(format!("function of dimension {} for a factor of dimension {n}", f.dim)));
        }
    }
    Ok(())
}

/// Product grid of the factors: per axis, the coordinates and the owning factor.
pub(crate) struct ProductGrid<'a> {
    fs: &'a [GridFunction],
    /// For each axis: factor index and position within the factor.
    pub(crate) axes: Vec<(usize, usize)>,
}

impl<'a> ProductGrid<'a> {
    pub(crate) fn new(fs: &'a [GridFunction]) -> Self {
        let axes = fs.iter().enumerate().flat_map(|(i, f)| (0..f.dim).map(move |a| (i, a))).collect();
        Self { fs, axes }
    }

    pub(crate) fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|&(i, _)| self.fs[i].points).collect()
    }

    /// Flat index of factor `i` given all axis indices.
    pub(crate) fn factor_index(&self, i: usize, idx: &[usize]) -> usize {
        let n = self.fs[i].points;
        let mut k = 0;
        for (ax, &(owner, _)) in self.axes.iter().enumerate() {
            if owner == i {
                k = k * n + idx[ax];
            }
        }
        k
    }
}

/// Visits every multi-index of the product grid with the first axis fixed to `first`.
pub(crate) fn for_each_index(sizes: &[usize], first: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx = vec![0; sizes.len()];
    idx[0] = first;
    loop {
        visit(&idx);
        let mut ax = sizes.len();
        loop {
            if ax == 1 {
                return;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < sizes[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

pub(crate) fn quadratic_form(q: &SymmetricMatrix, x: &[f64]) -> f64 {
    let n = x.len();
    let mut v = 0.0;
    for i in 0..n {
        v += q.get(i, i) * x[i] * x[i];
        for j in (i + 1)..n {
            v += 2.0 * q.get(i, j) * x[i] * x[j];
        }
    }
    v
}

/// Maximum over the product grid of `⟨x,Qx⟩ − Σ cᵢφᵢ(xᵢ)`; the duality
/// relation holds on the grid iff the slack is `≤ 0`. At most three axes.
pub fn duality_check(datum: &BLDatum, fs: &[GridFunction]) -> Result<f64> {
    check_factors(datum, fs)?;
    let grid = ProductGrid::new(fs);
    if grid.axes.len() > 3 {
        return Err(Error::UnsupportedScale(format!(
            "duality check over {} grid axes (at most 3)",
            grid.axes.len()
        )));
    }
    let sizes = grid.sizes();
    let c = datum.exponents();
    let q = datum.kernel();
    let slabs: Vec<f64> = (0..sizes[0])
        .into_par_iter()
        .map(|first| {
            let mut best = f64::NEG_INFINITY;
            let mut x = vec![0.0; sizes.len()];
            for_each_index(&sizes, first, |idx| {
                let mut penalty = 0.0;
                for (i, f) in fs.iter().enumerate() {
                    penalty += c[i] * f.potential[grid.factor_index(i, idx)];
                }
                if penalty == f64::INFINITY {
                    return;
                }
                for (ax, &(owner, _)) in grid.axes.iter().enumerate() {
                    x[ax] = fs[owner].coordinate(idx[ax]);
                }
                best = best.max(quadratic_form(q, &x) - penalty);
            });
            best
        })
        .collect();
    Ok(slabs.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Largest grid size per axis accepted by [`polar_tuple`].
pub const POLAR_TUPLE_MAX_POINTS: usize = 401;

/// Successive polar functions of a tuple of 1-D functions: `c₁Φ₁(x₁)` is the
/// grid maximum over the other coordinates of `⟨x,Qx⟩ − Σ_{i≥2} cᵢφᵢ(xᵢ)`,
/// then `Φ₂` is formed from `(Φ₁, φ₃, …)`, and so on. The result satisfies the
/// duality relation on the grid and dominates any input tuple that does.
pub fn polar_tuple(datum: &BLDatum, fs: &[GridFunction]) -> Result<Vec<GridFunction>> {
    let m = datum.len();
    if !(2..=3).contains(&m) || datum.dims().iter().any(|&n| n != 1) {
        return Err(Error::UnsupportedDatum(
            "polar tuples need two or three one-dimensional factors".into(),
        ));
    }
    check_factors(datum, fs)?;
    if fs.iter().any(|f| f.points > POLAR_TUPLE_MAX_POINTS) {
        return Err(Error::UnsupportedScale(format!(
            "polar tuples allow at most {POLAR_TUPLE_MAX_POINTS} points per axis"
        )));
    }
    let c = datum.exponents();
    let q = datum.kernel();
    let mut current: Vec<GridFunction> = fs.to_vec();
    for i in 0..m {
        let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        let xs_i = current[i].coordinates();
        let potential: Vec<f64> = xs_i
            .par_iter()
            .map(|&xi| {
                let mut best = f64::NEG_INFINITY;
                let mut x = vec![0.0; m];
                x[i] = xi;
                let a = &current[others[0]];
                for (ka, &pa) in a.potential.iter().enumerate() {
                    if pa == f64::INFINITY {
                        continue;
                    }
                    x[others[0]] = a.coordinate(ka);
                    let pen_a = c[others[0]] * pa;
                    if others.len() == 1 {
                        best = best.max(quadratic_form(q, &x) - pen_a);
                        continue;
                    }
                    let b = &current[others[1]];
                    for (kb, &pb) in b.potential.iter().enumerate() {
                        if pb == f64::INFINITY {
                            continue;
                        }
                        x[others[1]] = b.coordinate(kb);
                        best = best.max(quadratic_form(q, &x) - pen_a - c[others[1]] * pb);
                    }
                }
                best / c[i]
            })
            .collect();
        let f = &current[i];
        current[i] = GridFunction::new(1, f.radius, f.points, potential)?;
    }
    Ok(current)
}

/// `as_λ(V) = ∫ e^{(2λ−1)V − λ⟨x,∇V⟩} (det D²V)^λ dx` for `V = ½⟨x,Ax⟩`:
/// `(2π)^{n/2} det(A)^{λ−½}`.
pub fn affine_surface_area_quadratic(a: &SymmetricMatrix, lambda: f64) -> Result<f64> {
    let e = crate::matrix::sym_eigen(a)?;
    if e.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: e.eigenvalues[0] });
    }
    let log_det: f64 = e.eigenvalues.iter().map(|l| l.ln()).sum();
    let n = a.dim() as f64;
    // Written so that the identity gives (2π)^{n/2} with no extra rounding.
    Ok((2.0 * std::f64::consts::PI).powf(0.5 * n) * ((lambda - 0.5) * log_det).exp())
}

/// Grid form of `as_λ` for a 1-D convex potential `V`: central differences for
/// `V′` and `V″` (clamped at 0), trapezoid over the interior points.
pub fn affine_surface_area_grid(v: &GridFunction, lambda: f64) -> Result<f64> {
    if v.dim != 1 {
        return Err(Error::InvalidInput("grid-mode affine surface area is one-dimensional".into()));
    }
    if v.potential.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput("grid-mode affine surface area needs a finite potential".into()));
    }
    let h = v.spacing();
    let p = &v.potential;
    let second: Vec<f64> = (1..v.points - 1).map(|i| (p[i + 1] - 2.0 * p[i] + p[i - 1]) / (h * h)).collect();
    let scale = second.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let min = second.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-8 * (1.0 + scale) {
        return Err(Error::NotConvex { min_second_difference: min });
    }
    let mut total = 0.0;
    for i in 1..v.points - 1 {
        let x = v.coordinate(i);
        let d1 = (p[i + 1] - p[i - 1]) / (2.0 * h);
        let d2 = second[i - 1].max(0.0);
        if d2 == 0.0 && lambda > 0.0 {
            continue;
        }
        let w = if i == 1 || i == v.points - 2 { 0.5 * h } else { h };
        total += w * ((2.0 * lambda - 1.0) * p[i] - lambda * x * d1).exp() * d2.powf(lambda);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcavityProfile {
    /// Smallest `D²φ/h²` along the axes.
    pub lambda_est: f64,
    /// Largest `D²φ/h²` along the axes; `+∞` when a finite point borders a `+∞` one.
    pub lambda_max_est: f64,
    /// The mass-one envelope `λ/2|x|² + (n/2)log(2π/Λ) ≤ φ ≤ Λ/2|x|² + (n/2)log(2π/λ)` holds.
    pub envelope_ok: bool,
}

/// Relative tolerance of the envelope test.
pub const ENVELOPE_TOL: f64 = 1e-6;

/// Second-difference extrema of `φ` along the axes and the envelope verdict.
pub fn concavity_profile(f: &GridFunction) -> Result<ConcavityProfile> {
    concavity_profile_above(f, 0.0)
}

/// [`concavity_profile`] restricted to points where `f ≥ floor · max f`, for
/// computed densities whose far tails carry rounding noise.
pub fn concavity_profile_above(f: &GridFunction, floor: f64) -> Result<ConcavityProfile> {
    let h2 = f.spacing().powi(2);
    let n = f.points;
    let min_phi = f.potential.iter().copied().fold(f64::INFINITY, f64::min);
    let cut = if floor > 0.0 { min_phi - floor.ln() } else { f64::INFINITY };
    let inside = |p: f64| p <= cut;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |a: f64, b: f64, c: f64| {
        if !inside(b) || !b.is_finite() {
            return;
        }
        if a == f64::INFINITY || c == f64::INFINITY {
            hi = f64::INFINITY;
            return;
        }
        if !inside(a) || !inside(c) {
            return;
        }
        let d = (a - 2.0 * b + c) / h2;
        lo = lo.min(d);
        hi = hi.max(d);
    };
    let p = &f.potential;
    match f.dim {
        1 => p.windows(3).for_each(|w| visit(w[0], w[1], w[2])),
        _ => {
            for i in 0..n {
                for j in 0..n {
                    if j >= 1 && j + 1 < n {
                        visit(p[i * n + j - 1], p[i * n + j], p[i * n + j + 1]);
                    }
                    if i >= 1 && i + 1 < n {
                        visit(p[(i - 1) * n + j], p[i * n + j], p[(i + 1) * n + j]);
                    }
                }
            }
        }
    }
    if lo == f64::INFINITY {
        return Err(Error::InvalidInput("no interior finite points to profile".into()));
    }
    let lambda = lo;
    let big_lambda = hi;
    let normalized = f.normalized()?;
    let dim = f.dim as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let log_term = |curv: f64| {
        if curv <= 0.0 {
            f64::INFINITY
        } else if curv == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            0.5 * dim * (two_pi / curv).ln()
        }
    };
    let mut envelope_ok = true;
    for (k, &phi) in normalized.potential.iter().enumerate() {
        if !inside(f.potential[k]) {
            continue;
        }
        let r2: f64 = f.point(k).iter().map(|x| x * x).sum();
        let lower = if lambda > 0.0 { 0.5 * lambda * r2 } else { 0.0 } + log_term(big_lambda);
        let upper = if big_lambda.is_finite() { 0.5 * big_lambda * r2 } else { f64::INFINITY }
            + log_term(lambda.max(0.0));
        let tol = ENVELOPE_TOL * (1.0 + phi.abs().min(f64::MAX));
        if phi.is_finite() && (phi < lower - tol || phi > upper + tol) {
            envelope_ok = false;
        }
        if phi == f64::INFINITY && upper.is_finite() {
            envelope_ok = false;
        }
    }
    Ok(ConcavityProfile { lambda_est: lambda, lambda_max_est: big_lambda, envelope_ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(a: f64, r: f64, n: usize) -> GridFunction {
        GridFunction::gaussian(&SymmetricMatrix::scalar(1, a), r, n).unwrap()
    }

    #[test]
    fn construction_symmetrizes() {
        let f = GridFunction::new(1, 1.0, 3, vec![1.0, 0.0, 3.0]).unwrap();
        assert_eq!(f.potential(), &[2.0, 0.0, 2.0]);
        assert!(GridFunction::new(1, 1.0, 4, vec![0.0; 4]).is_err());
        assert!(GridFunction::new(1, -1.0, 3, vec![0.0; 3]).is_err());
        assert!(GridFunction::new(1, 1.0, 3, vec![f64::INFINITY; 3]).is_err());
    }

    #[test]
    fn integrals() {
        let g = gauss(1.0, 8.0, 801);
        assert!((g.integral() - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-8);
        let ind = GridFunction::indicator(1, 1.0, 3.0, 301).unwrap();
        let h = ind.spacing();
        assert!((ind.integral() - 2.0).abs() <= h * h);
    }

    #[test]
    fn text_round_trip() {
        let f = GridFunction::indicator(2, 0.5, 1.0, 5).unwrap();
        let back = GridFunction::from_text(&f.to_text()).unwrap();
        assert_eq!(back, f);
        assert!(f.to_text().contains("inf"));
        assert!(GridFunction::from_text("dim 1\nradius 1\n").is_err());
    }

    #[test]
    fn conjugate_of_quadratic() {
        let g = gauss(1.0, 8.0, 401);
        let d = legendre_transform(&g, None).unwrap();
        for (k, v) in d.potential().iter().enumerate() {
            let y = d.coordinate(k);
            if y.abs() <= 8.0 {
                assert!((v - 0.5 * y * y).abs() < 1e-9, "{y} {v}");
            }
        }
    }

    #[test]
    fn separable_two_dimensional_transform() {
        let a = SymmetricMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let g = GridFunction::gaussian(&a, 4.0, 41).unwrap();
        let d = legendre_transform(&g, Some(2.0)).unwrap();
        // Brute force over the product grid.
        for k in (0..d.len()).step_by(37) {
            let y = d.point(k);
            let mut best = f64::NEG_INFINITY;
            for j in 0..g.len() {
                let x = g.point(j);
                best = best.max(x[0] * y[0] + x[1] * y[1] - g.potential()[j]);
            }
            assert!((best - d.potential()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn polar_of_exp_norm_is_indicator() {
        let f = GridFunction::exp_norm(1, 30.0, 3001).unwrap();
        let p = polar_function(&f, None).unwrap();
        for (k, v) in p.potential().iter().enumerate() {
            let y = p.coordinate(k);
            if y.abs() <= 1.0 + 1e-12 {
                assert_eq!(*v, 0.0, "{y}");
            } else {
                assert_eq!(*v, f64::INFINITY, "{y}");
            }
        }
    }

    #[test]
    fn profile_of_gaussian() {
        let p = concavity_profile(&gauss(2.0, 8.0, 401)).unwrap();
        assert!((p.lambda_est - 2.0).abs() < 1e-6 && (p.lambda_max_est - 2.0).abs() < 1e-6);
        assert!(p.envelope_ok);
        let ind = concavity_profile(&GridFunction::indicator(1, 1.0, 2.0, 201).unwrap()).unwrap();
        assert_eq!(ind.lambda_est, 0.0);
        assert_eq!(ind.lambda_max_est, f64::INFINITY);
    }

    #[test]
    fn surface_area_modes_agree() {
        let v = gauss(1.0, 8.0, 801);
        for lambda in [0.0, 0.5, 1.0] {
            let grid = affine_surface_area_grid(&v, lambda).unwrap();
            let quad = affine_surface_area_quadratic(&SymmetricMatrix::scalar(1, 1.0), lambda).unwrap();
            assert!((grid - quad).abs() < 1e-4);
        }
        let bump = GridFunction::from_potential(1, 2.0, 41, |x| -x[0] * x[0]).unwrap();
        assert!(matches!(affine_surface_area_grid(&bump, 1.0), Err(Error::NotConvex { .. })));
    }
}

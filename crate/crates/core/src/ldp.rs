//! Level-1 large deviations: the generating function F assembled from the
//! cluster series, Legendre transforms, the Golden–Thompson rate Ĩ, the
//! asymptotic variance and central-limit diagnostics, and the product-state
//! closed form.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactSystem;
use crate::model::{Certificate, LatticeBox, Model};
use crate::opalg::{herm_eig, mat_exp, Operator, C64};
use crate::polymer::{log_trace_exp, ClusterExpansion};
use crate::Caps;

/// Convexity slack for second differences.
pub const CONVEXITY_TOL: f64 = 1e-9;

type Eval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// F on a t-grid, optionally backed by an evaluator for off-grid points.
#[derive(Clone)]
pub struct GeneratingFunction {
    pub t_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    pub beta: f64,
    pub order: usize,
    pub certificate: Option<Certificate>,
    eval: Option<Eval>,
}

impl std::fmt::Debug for GeneratingFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratingFunction")
            .field("t_grid", &self.t_grid)
            .field("f_values", &self.f_values)
            .field("beta", &self.beta)
            .field("order", &self.order)
            .finish()
    }
}

impl GeneratingFunction {
    /// Tabulates `f` on the grid and keeps it for refinement.
    pub fn from_fn<F>(t_grid: Vec<f64>, beta: f64, order: usize, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let f_values = t_grid.par_iter().map(|&t| f(t)).collect();
        GeneratingFunction {
            t_grid,
            f_values,
            beta,
            order,
            certificate: None,
            eval: Some(Arc::new(f)),
        }
    }

    /// Grid values only; off-grid points use linear interpolation.
    pub fn tabulated(t_grid: Vec<f64>, f_values: Vec<f64>) -> Result<Self> {
        if t_grid.len() != f_values.len() || t_grid.len() < 2 {
            return Err(Error::Domain("grid and values must have equal length ≥ 2".into()));
        }
        if t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("t grid must be increasing".into()));
        }
        Ok(GeneratingFunction {
            t_grid,
            f_values,
            beta: f64::NAN,
            order: 0,
            certificate: None,
            eval: None,
        })
    }

    pub fn with_certificate(mut self, c: Option<Certificate>) -> Self {
        self.certificate = c;
        self
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.eval {
            Some(f) => f(t),
            None => interpolate(&self.t_grid, &self.f_values, t),
        }
    }

    /// Slopes of the first and last grid intervals.
    pub fn end_slopes(&self) -> (f64, f64) {
        let n = self.t_grid.len();
        let s = |i: usize| (self.f_values[i + 1] - self.f_values[i]) / (self.t_grid[i + 1] - self.t_grid[i]);
        (s(0), s(n - 2))
    }

    /// Smallest second difference (scaled to a second derivative).
    pub fn min_curvature(&self) -> f64 {
        min_second_difference(&self.t_grid, &self.f_values)
    }

    pub fn is_convex(&self) -> bool {
        self.min_curvature() >= -CONVEXITY_TOL
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - w) + ys[i + 1] * w
}

fn min_second_difference(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(3)
        .zip(ys.windows(3))
        .map(|(x, y)| {
            let s1 = (y[1] - y[0]) / (x[1] - x[0]);
            let s2 = (y[2] - y[1]) / (x[2] - x[1]);
            (s2 - s1) / (0.5 * (x[2] - x[0]))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Rate function on an x-grid; +∞ marks points outside the attainable slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFunction {
    pub x_grid: Vec<f64>,
    pub i_values: Vec<f64>,
}

impl RateFunction {
    pub fn min(&self) -> f64 {
        self.i_values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Convexity over the finite part of the grid.
    pub fn is_convex(&self) -> bool {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .x_grid
            .iter()
            .zip(&self.i_values)
            .filter(|(_, v)| v.is_finite())
            .map(|(x, v)| (*x, *v))
            .unzip();
        xs.len() < 3 || min_second_difference(&xs, &ys) >= -CONVEXITY_TOL
    }
}

/// Maximizes a concave function on [lo, hi] by golden section to `tol`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    let m = 0.5 * (lo + hi);
    (m, f(m))
}

/// sup_t (x t − F(t)) over the grid interval: grid maximum, then golden
/// section between the neighbouring grid points.
pub fn conjugate_at<F: Fn(f64) -> f64>(f: &F, grid: &[f64], values: &[f64], x: f64) -> f64 {
    let (k, _) = grid
        .iter()
        .zip(values)
        .map(|(t, v)| x * t - v)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(grid.len() - 1)];
    let grid_best = x * grid[k] - values[k];
    let (_, refined) = golden_max(|t| x * t - f(t), lo, hi, 1e-10);
    refined.max(grid_best)
}

/// I(x) = sup_t (x t − F(t)); +∞ outside the slope interval of the grid.
pub fn legendre(f: &GeneratingFunction, x_grid: &[f64]) -> Result<RateFunction> {
    if !f.is_convex() {
        return Err(Error::Domain(format!(
            "generating function not convex (second difference {:.3e})",
            f.min_curvature()
        )));
    }
    let (s_lo, s_hi) = f.end_slopes();
    let slack = 1e-12 * (1.0 + s_lo.abs().max(s_hi.abs()));
    let eval = |t: f64| f.value(t);
    let i_values = x_grid
        .par_iter()
        .map(|&x| {
            if x < s_lo - slack || x > s_hi + slack {
                f64::INFINITY
            } else {
                conjugate_at(&eval, &f.t_grid, &f.f_values, x)
            }
        })
        .collect();
    Ok(RateFunction {
        x_grid: x_grid.to_vec(),
        i_values,
    })
}

/// F**(t) = sup_x (t x − I(x)) with I = F* evaluated through `f`, the x-grid
/// inside the slope interval of F.
pub fn biconjugate(f: &GeneratingFunction, x_grid: &[f64], t_points: &[f64]) -> Result<Vec<f64>> {
    let rate = legendre(f, x_grid)?;
    if rate.i_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("x grid leaves the slope interval".into()));
    }
    let eval = |t: f64| f.value(t);
    let i_of = |x: f64| conjugate_at(&eval, &f.t_grid, &f.f_values, x);
    Ok(t_points
        .par_iter()
        .map(|&t| conjugate_at(&i_of, x_grid, &rate.i_values, t))
        .collect())
}

/// Generating function F(t) = Ξ(t) − Ξ(0) + log Tr e^{tX} − log d, complex t.
pub fn f_free_complex(engine: &ClusterExpansion, t: C64, beta: f64) -> Result<C64> {
    let b = C64::new(beta, 0.0);
    let xi_t = engine.xi_free(t, b)?.value;
    let xi_0 = engine.xi_free(C64::new(0.0, 0.0), b)?.value;
    let d = engine.site_dim() as f64;
    Ok(xi_t - xi_0 + log_trace_exp(&engine.linear_tilt(t)) - d.ln())
}

/// Real generating function from the truncated cluster series.
pub fn f_free(engine: &ClusterExpansion, t: f64, beta: f64) -> Result<f64> {
    Ok(f_free_complex(engine, C64::new(t, 0.0), beta)?.re)
}

/// Rigorous bound on the truncation error of F at (t, β), when certified.
pub fn f_free_tail(engine: &ClusterExpansion, t: f64, beta: f64) -> Option<f64> {
    let b = C64::new(beta, 0.0);
    Some(engine.tail_bound(C64::new(t, 0.0), b)? + engine.tail_bound(C64::new(0.0, 0.0), b)?)
}

/// P(βΦ) = log d + Ξ(0).
pub fn pressure(engine: &ClusterExpansion, beta: f64) -> Result<f64> {
    let xi = engine.xi_free(C64::new(0.0, 0.0), C64::new(beta, 0.0))?.value;
    Ok((engine.site_dim() as f64).ln() + xi.re)
}

/// Default t-grid: [−t_max, t_max] with the given step.
pub fn t_grid(t_max: f64, step: f64) -> Vec<f64> {
    let n = (t_max / step).round() as i64;
    (-n..=n).map(|k| k as f64 * step).collect()
}

/// Cluster-series generating function on a grid.
pub fn cluster_generating_function(
    engine: Arc<ClusterExpansion>,
    t_grid: Vec<f64>,
    beta: f64,
) -> Result<GeneratingFunction> {
    // surface evaluation errors before wrapping in an infallible closure
    for &t in &t_grid {
        f_free(&engine, t, beta)?;
    }
    let order = engine.order();
    let cert = engine.certificate().copied();
    let e = engine.clone();
    Ok(GeneratingFunction::from_fn(t_grid, beta, order, move |t| {
        f_free(&e, t, beta).expect("checked on the grid")
    })
    .with_certificate(cert))
}

/// Exact finite-volume generating function on a grid.
pub fn exact_generating_function(system: Arc<ExactSystem>, t_grid: Vec<f64>, beta: f64) -> GeneratingFunction {
    GeneratingFunction::from_fn(t_grid, beta, 0, move |t| system.finite_f(t, beta))
}

/// Ĩ on a grid with per-volume values and 1/|Λ| extrapolation.
#[derive(Clone, Debug, PartialEq)]
pub struct TildeRate {
    /// Values at the largest volume.
    pub rate: RateFunction,
    /// (|Λ|, values) for every volume in the sequence.
    pub per_volume: Vec<(usize, Vec<f64>)>,
    /// Two-point Richardson estimate assuming Ĩ_Λ = Ĩ + c/|Λ|.
    pub extrapolated: Option<Vec<f64>>,
}

/// Ĩ(a) = −[h_a a + P(h_a) − P(0)] at one exact volume.
pub fn tilde_i_exact(system: &ExactSystem, a_grid: &[f64], beta: f64) -> Result<Vec<f64>> {
    let p0 = system.tilted_pressure(0.0, beta);
    a_grid
        .par_iter()
        .map(|&a| {
            let h = system.solve_tilt(a, beta)?;
            Ok(-(h * a + system.tilted_pressure(h, beta) - p0))
        })
        .collect()
}

pub fn tilde_i(
    model: &Model,
    a_grid: &[f64],
    beta: f64,
    volumes: &[LatticeBox],
    caps: &Caps,
) -> Result<TildeRate> {
    if volumes.is_empty() {
        return Err(Error::Domain("empty volume sequence".into()));
    }
    let mut per_volume = Vec::new();
    for v in volumes {
        let sys = ExactSystem::new(model, v, caps)?;
        per_volume.push((v.len(), tilde_i_exact(&sys, a_grid, beta)?));
    }
    let last = per_volume.last().unwrap().1.clone();
    let extrapolated = if per_volume.len() >= 2 {
        let (n1, i1) = &per_volume[per_volume.len() - 2];
        let (n2, i2) = &per_volume[per_volume.len() - 1];
        let (n1, n2) = (*n1 as f64, *n2 as f64);
        (n1 != n2).then(|| i1.iter().zip(i2).map(|(a, b)| (n2 * b - n1 * a) / (n2 - n1)).collect())
    } else {
        None
    };
    Ok(TildeRate {
        rate: RateFunction {
            x_grid: a_grid.to_vec(),
            i_values: last,
        },
        per_volume,
        extrapolated,
    })
}

/// Pointwise comparison of F̃ ≤ F and Ĩ ≥ I at one exact volume.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityReport {
    /// (t, F, F̃, F − F̃)
    pub f_rows: Vec<(f64, f64, f64, f64)>,
    /// (x, I, Ĩ)
    pub i_rows: Vec<(f64, f64, f64)>,
    /// Human-readable descriptions of violations beyond 1e-8.
    pub violations: Vec<String>,
}

impl InequalityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_gap(&self) -> f64 {
        self.f_rows.iter().map(|r| r.3).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn inequality_check(system: &ExactSystem, t_grid: &[f64], x_grid: &[f64], beta: f64) -> Result<InequalityReport> {
    let tol = 1e-8;
    let f_rows: Vec<(f64, f64, f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let g = system.golden_thompson_gap(t, beta);
            (t, g.f, g.tilde_f, g.gap)
        })
        .collect();
    let f_values: Vec<f64> = f_rows.iter().map(|r| r.1).collect();
    let gf = GeneratingFunction::tabulated(t_grid.to_vec(), f_values)?;
    let eval = |t: f64| system.finite_f(t, beta);
    let (s_lo, s_hi) = gf.end_slopes();
    let tilde = tilde_i_exact(system, x_grid, beta)?;
    let mut violations = Vec::new();
    let mut i_rows = Vec::new();
    for (&x, &it) in x_grid.iter().zip(&tilde) {
        let i = if x < s_lo || x > s_hi {
            f64::INFINITY
        } else {
            conjugate_at(&eval, &gf.t_grid, &gf.f_values, x)
        };
        if it < i - tol {
            violations.push(format!("Ĩ({}) = {} below I = {}", x, it, i));
        }
        i_rows.push((x, i, it));
    }
    for r in &f_rows {
        if r.3 < -tol {
            violations.push(format!("F̃({}) = {} above F = {}", r.0, r.2, r.1));
        }
    }
    Ok(InequalityReport {
        f_rows,
        i_rows,
        violations,
    })
}

/// How σ² is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sigma2Method {
    /// Second Taylor coefficient of F from a Cauchy integral in t.
    Series,
    /// Richardson-refined central differences of F at t = 0.
    FiniteDiff,
    /// Exact Σ_i covariance at the largest feasible volume.
    Correlation,
}

/// F''(0) = (2/N r²) Σ_k F(r e^{iθ_k}) e^{−2iθ_k}, with r inside the
/// analyticity strip.
pub fn sigma2_series(engine: &ClusterExpansion, beta: f64) -> Result<f64> {
    let x_norm = engine
        .x_eigenvalues()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if x_norm == 0.0 {
        return Ok(0.0);
    }
    let r = 0.5 * std::f64::consts::LN_2 / x_norm;
    let n = 64;
    let terms: Vec<C64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let z = C64::from_polar(r, th);
            Ok(f_free_complex(engine, z, beta)? * C64::from_polar(1.0, -2.0 * th))
        })
        .collect::<Result<_>>()?;
    let s: C64 = terms.iter().sum();
    Ok(2.0 * s.re / (n as f64 * r * r))
}

/// (4D(h/2) − D(h))/3 with D the central second difference, h = 1e-3.
pub fn sigma2_finite_diff<F: Fn(f64) -> Result<f64>>(f: F) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h)) };
    let h = 1e-3;
    Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

pub fn sigma2(
    engine: &ClusterExpansion,
    model: &Model,
    beta: f64,
    method: Sigma2Method,
    correlation_volume: Option<&LatticeBox>,
    caps: &Caps,
) -> Result<f64> {
    match method {
        Sigma2Method::Series => sigma2_series(engine, beta),
        Sigma2Method::FiniteDiff => sigma2_finite_diff(|t| f_free(engine, t, beta)),
        Sigma2Method::Correlation => {
            let v = correlation_volume
                .ok_or_else(|| Error::Domain("correlation method needs a volume".into()))?;
            ExactSystem::new(model, v, caps).map(|s| s.chi2(beta))
        }
    }
}

/// |ω(e^{itW_Λ}) − e^{−t²σ²/2}| along a volume sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct CltReport {
    /// (|Λ|, t, deviation)
    pub rows: Vec<(usize, f64, f64)>,
}

impl CltReport {
    pub fn deviations_at(&self, t: f64) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.1 == t)
            .map(|r| (r.0, r.2))
            .collect()
    }
}

pub fn clt_compare(
    model: &Model,
    volumes: &[LatticeBox],
    t_grid: &[f64],
    beta: f64,
    sigma2: f64,
    caps: &Caps,
) -> Result<CltReport> {
    let mut rows = Vec::new();
    for v in volumes {
        let sys = ExactSystem::new(model, v, caps)?;
        for &t in t_grid {
            let gauss = (-t * t * sigma2 / 2.0).exp();
            rows.push((v.len(), t, (sys.clt_charfn(t, beta) - gauss).norm()));
        }
    }
    Ok(CltReport { rows })
}

/// F(z) = log(Tr[e^{zX}e^{−A}]/Tr e^{−A}) and dF/dz for a single site.
pub fn product_state_f(z: C64, x: &Operator, a: &Operator) -> Result<(C64, C64)> {
    if x.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: a.dim(),
        });
    }
    a.check_hermitian()?;
    // shift A by its smallest eigenvalue for stability; the ratio is unchanged
    let shift = herm_eig(a)?.eigenvalues[0];
    let ea = mat_exp(&(a - &Operator::identity(a.dim()).scale(C64::new(shift, 0.0))), C64::new(-1.0, 0.0))?;
    let ez = mat_exp(x, z)?;
    let num = &ez * &ea;
    let den = num.trace();
    if den.norm() <= 1e-300 {
        return Err(Error::DegenerateTilt(den.norm()));
    }
    let value = (den / ea.trace()).ln();
    let deriv = (x * &num).trace() / den;
    Ok((value, deriv))
}

//! Transnormality `F(grad f)^2 = b(f)`, reconstruction of `b`, f-segments,
//! the level-distance formula, the `g_{grad f}` reduction, Hessian identities
//! and Morse-Bott checks at critical points.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{gradient_vector, DEFAULT_CRITICAL_THRESHOLD};
use crate::domain::Domain;
use crate::error::{FinslerError, Result};
use crate::field::{Matrix, MatrixField, ScalarField, Vector};
use crate::foliation::{Direction, LevelSampler};
use crate::geodesic::{
    integrate_geodesic, integrate_riemannian_geodesic, integrate_to_level, integrate_to_maximum,
    level_tangent_basis, orthogonality_defect_at, spray_at, CrossingEvent, GeodesicOptions, GeodesicSample,
    GeodesicTrajectory, DEFAULT_STEP,
};
use crate::metric::{MetricSpec, Point, TangentVector};
use crate::numerics::{integrate, Pchip};

/// Fitted `b` values at or below this mark a critical value.
pub const CRITICAL_B_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TransnormalOptions {
    /// Bin width in f-values; `None` means `max(1e-3, range / 200)`.
    pub bin_width: Option<f64>,
    pub tolerance: f64,
    pub critical_threshold: f64,
}

impl Default for TransnormalOptions {
    fn default() -> Self {
        Self { bin_width: None, tolerance: 1e-6, critical_threshold: DEFAULT_CRITICAL_THRESHOLD }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BTableRow {
    pub level: f64,
    pub b: f64,
    pub spread: f64,
    pub values: Vec<f64>,
}

/// Interpolant for `b`, with critical values pinned to zero.
#[derive(Debug, Clone, Serialize)]
pub struct BFit {
    interpolant: Option<Pchip>,
    constant: f64,
    pub critical_levels: Vec<f64>,
    pub regular_range: (f64, f64),
}

impl BFit {
    fn from_nodes(mut nodes: Vec<(f64, f64)>, critical_levels: Vec<f64>, regular_range: (f64, f64)) -> Self {
        nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        nodes.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-12);
        let constant = nodes.first().map(|n| n.1).unwrap_or(0.0);
        let (xs, ys): (Vec<f64>, Vec<f64>) = nodes.into_iter().unzip();
        Self { interpolant: Pchip::new(xs, ys), constant, critical_levels, regular_range }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.interpolant.as_ref().map_or(self.constant, |p| p.value(t))
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.interpolant.as_ref().map_or(0.0, |p| p.derivative(t))
    }

    /// One-sided slopes of the interpolant at its first and last node.
    pub fn end_slopes(&self) -> (f64, f64) {
        self.interpolant.as_ref().map_or((0.0, 0.0), |p| p.end_slopes())
    }

    /// Range covered by the nodes, critical levels included.
    pub fn domain(&self) -> (f64, f64) {
        self.interpolant.as_ref().map_or(self.regular_range, |p| p.domain())
    }

    pub fn is_critical_level(&self, t: f64) -> bool {
        self.critical_levels.iter().any(|c| (c - t).abs() <= 1e-9) || self.value(t) <= CRITICAL_B_THRESHOLD
    }

    /// First critical value strictly inside `(c, d)`, if any.
    pub fn critical_value_inside(&self, c: f64, d: f64) -> Option<f64> {
        if let Some(v) = self.critical_levels.iter().find(|v| **v > c + 1e-9 && **v < d - 1e-9) {
            return Some(*v);
        }
        const SCAN: usize = 1000;
        (1..SCAN).map(|i| c + (d - c) * i as f64 / SCAN as f64).find(|t| self.value(*t) <= CRITICAL_B_THRESHOLD)
    }

    /// `int_c^d ds / sqrt(b(s))`; critical end points are handled by `s = e +- w^2`.
    pub fn distance_integral(&self, c: f64, d: f64) -> Result<f64> {
        if !(c < d) {
            return Err(FinslerError::InvalidArgument(format!("need c < d, got c = {c}, d = {d}")));
        }
        if let Some(v) = self.critical_value_inside(c, d) {
            return Err(FinslerError::IntervalContainsCriticalValue { c, d, value: v });
        }
        let tol = 1e-11;
        let inv = |s: f64| {
            let b = self.value(s);
            if b > 0.0 {
                1.0 / b.sqrt()
            } else {
                f64::INFINITY
            }
        };
        let m = 0.5 * (c + d);
        let left = if self.is_critical_level(c) {
            let wmax = (m - c).sqrt();
            integrate(|w| 2.0 * w * inv(c + w * w), 0.0, wmax, tol)
        } else {
            integrate(inv, c, m, tol)
        };
        let right = if self.is_critical_level(d) {
            let wmax = (d - m).sqrt();
            integrate(|w| 2.0 * w * inv(d - w * w), 0.0, wmax, tol)
        } else {
            integrate(inv, m, d, tol)
        };
        let total = left + right;
        if !total.is_finite() {
            return Err(FinslerError::Eval(format!("distance integral over [{c}, {d}] diverged")));
        }
        Ok(total)
    }

    /// Level `s` at distance `r` from the critical value `a`, below `a` when `downhill`.
    pub fn level_at_distance_from_critical(&self, a: f64, r: f64, downhill: bool) -> Result<f64> {
        let (lo_end, hi_end) = self.domain();
        let dist = |s: f64| if downhill { self.distance_integral(s, a) } else { self.distance_integral(a, s) };
        let (mut near, mut far) = if downhill { (a, lo_end) } else { (a, hi_end) };
        if dist(far)? < r {
            return Err(FinslerError::NeverReached { target: r, reason: "radius exceeds the fitted range".into() });
        }
        for _ in 0..80 {
            let mid = 0.5 * (near + far);
            if dist(mid)? < r {
                near = mid;
            } else {
                far = mid;
            }
        }
        Ok(0.5 * (near + far))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransnormalityReport {
    pub sample_count: usize,
    pub b_table: Vec<BTableRow>,
    pub spread_per_level: f64,
    pub b_fit: BFit,
    pub tolerance: f64,
    pub verdict: bool,
    pub critical_levels: Vec<f64>,
    pub critical_samples: usize,
    pub end_slopes: (f64, f64),
}

impl TransnormalityReport {
    /// `level,b,spread,count` rows.
    pub fn b_table_csv(&self) -> String {
        let mut out = String::from("level,b,spread,count\n");
        for r in &self.b_table {
            let _ = writeln!(out, "{:?},{:?},{:?},{}", r.level, r.b, r.spread, r.values.len());
        }
        out
    }
}

fn median(sorted: &[f64]) -> f64 {
    sorted[sorted.len() / 2]
}

/// Bins `F(grad f)^2` by f-value over the sample points and fits `b`.
pub fn check_transnormal(
    metric: &MetricSpec,
    f: &ScalarField,
    samples: &[Vector],
    options: &TransnormalOptions,
) -> Result<TransnormalityReport> {
    if samples.is_empty() {
        return Err(FinslerError::EmptySample);
    }
    let evaluated: Vec<(f64, Option<f64>)> = samples
        .par_iter()
        .map(|x| {
            let t = f.eval(x);
            if f.differential(x).norm() < options.critical_threshold {
                return Ok((t, None));
            }
            let g = gradient_vector(metric, f, x)?;
            let z = metric.eval_at(x, &g)?;
            Ok((t, Some(z * z)))
        })
        .collect::<Result<_>>()?;
    let mut critical_levels: Vec<f64> = evaluated.iter().filter(|e| e.1.is_none()).map(|e| e.0).collect();
    let critical_samples = critical_levels.len();
    critical_levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    critical_levels.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    let mut regular: Vec<(f64, f64)> = evaluated.iter().filter_map(|(t, b)| b.map(|b| (*t, b))).collect();
    if regular.is_empty() {
        return Err(FinslerError::EmptySample);
    }
    regular.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let range = regular.last().unwrap().0 - regular[0].0;
    let width = options.bin_width.unwrap_or((range / 200.0).max(1e-3));
    let mut bins: Vec<Vec<(f64, f64)>> = Vec::new();
    for s in regular.iter().copied() {
        match bins.last_mut() {
            Some(bin) if s.0 - bin[0].0 <= width => bin.push(s),
            _ => bins.push(vec![s]),
        }
    }
    let b_table: Vec<BTableRow> = bins
        .iter()
        .map(|bin| {
            let mut levels: Vec<f64> = bin.iter().map(|s| s.0).collect();
            let mut values: Vec<f64> = bin.iter().map(|s| s.1).collect();
            levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.shrink_to_fit();
            BTableRow { level: median(&levels), b: median(&sorted), spread: sorted.last().unwrap() - sorted[0], values }
        })
        .collect();
    let spread = b_table.iter().map(|r| r.spread).fold(0.0, f64::max);
    let mut nodes: Vec<(f64, f64)> = b_table.iter().map(|r| (r.level, r.b)).collect();
    nodes.retain(|n| critical_levels.iter().all(|c| (c - n.0).abs() > 1e-12));
    nodes.extend(critical_levels.iter().map(|c| (*c, 0.0)));
    let fit = BFit::from_nodes(nodes, critical_levels.clone(), (regular[0].0, regular.last().unwrap().0));
    Ok(TransnormalityReport {
        sample_count: samples.len(),
        end_slopes: fit.end_slopes(),
        b_table,
        spread_per_level: spread,
        b_fit: fit,
        tolerance: options.tolerance,
        verdict: spread <= options.tolerance,
        critical_levels,
        critical_samples,
    })
}

#[derive(Debug, Clone)]
pub struct SegmentOptions {
    pub step: f64,
    pub max_length: f64,
    pub levels: Vec<f64>,
    /// Stop once f reaches this value.
    pub until_level: Option<f64>,
    pub domain: Domain,
    pub residual_tolerance: f64,
    /// Stop once `|df|` drops below this fraction of its value at the start.
    pub critical_fraction: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            max_length: 10.0,
            levels: Vec::new(),
            until_level: None,
            domain: Domain::Unbounded,
            residual_tolerance: 1e-5,
            critical_fraction: 5e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FSegment {
    pub direction: Direction,
    pub trajectory: GeodesicTrajectory,
    pub level_crossings: Vec<CrossingEvent>,
    /// `max |F(gamma') - 1|`.
    pub reparametrization_residual: f64,
    /// `max |gamma'' - spray(gamma, gamma')|` along the curve.
    pub geodesic_residual: f64,
    pub is_geodesic: bool,
    pub strictly_monotone: bool,
    pub termination: String,
}

/// Unit flow field: `grad f / F(grad f)` forward, `L^{-1}(-df) / F(L^{-1}(-df))` backward.
fn segment_field(metric: &MetricSpec, f: &ScalarField, x: &Vector, direction: Direction) -> Result<Vector> {
    let df = f.differential(x);
    if df.norm() < DEFAULT_CRITICAL_THRESHOLD {
        return Err(FinslerError::CriticalPoint { at: x.as_slice().to_vec(), df_norm: df.norm() });
    }
    let omega = match direction {
        Direction::Forward => df,
        Direction::Backward => -df,
    };
    let (v, _) = crate::calculus::legendre_inverse_at(metric, x, &omega)?;
    let n = metric.eval_at(x, &v)?;
    Ok(v / n)
}

fn flow_step(metric: &MetricSpec, f: &ScalarField, x: &Vector, h: f64, dir: Direction) -> Result<Vector> {
    let k1 = segment_field(metric, f, x, dir)?;
    let k2 = segment_field(metric, f, &(x + &k1 * (0.5 * h)), dir)?;
    let k3 = segment_field(metric, f, &(x + &k2 * (0.5 * h)), dir)?;
    let k4 = segment_field(metric, f, &(x + &k3 * h), dir)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn flow_residual(metric: &MetricSpec, f: &ScalarField, x: &Vector, u: &Vector, dir: Direction) -> Result<f64> {
    let eta = 1e-3;
    let d = |e: f64| -> Result<Vector> {
        let a = segment_field(metric, f, &(x + u * e), dir)?;
        let b = segment_field(metric, f, &(x - u * e), dir)?;
        Ok((a - b) / (2.0 * e))
    };
    let accel = (d(0.5 * eta)? * 4.0 - d(eta)?) / 3.0;
    Ok((accel - spray_at(metric, x, u)?).norm())
}

/// Traces the arc-length parametrized integral curve of the unit gradient field from `start`.
pub fn trace_f_segment(
    metric: &MetricSpec,
    f: &ScalarField,
    start: &Point,
    direction: Direction,
    options: &SegmentOptions,
) -> Result<FSegment> {
    let x0 = start.to_vector();
    if !options.domain.contains(&x0) {
        return Err(FinslerError::LeftDomain { time: 0.0, at: start.coords.clone() });
    }
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let u0 = segment_field(metric, f, &x0, direction)?;
    let df_floor = options.critical_fraction * f.differential(&x0).norm();
    let h = options.step;
    let mut samples = vec![GeodesicSample { t: 0.0, point: start.coords.clone(), velocity: u0.as_slice().to_vec(), arc_length: 0.0 }];
    let mut crossings: Vec<CrossingEvent> = Vec::new();
    let mut x = x0;
    let mut fx = f.eval(&x);
    let mut t = 0.0;
    let mut residual: f64 = 0.0;
    let mut speed_residual: f64 = 0.0;
    let termination;
    loop {
        if t + h > options.max_length + 1e-12 {
            termination = "max-length";
            break;
        }
        let xn = match flow_step(metric, f, &x, h, direction) {
            Ok(xn) => xn,
            Err(FinslerError::CriticalPoint { .. }) => {
                termination = "critical-point";
                break;
            }
            Err(e) => return Err(e),
        };
        if !options.domain.contains(&xn) {
            termination = "domain-boundary";
            break;
        }
        let fn_ = f.eval(&xn);
        if !(sign * (fn_ - fx) > 0.0) || f.differential(&xn).norm() < df_floor {
            termination = "critical-point";
            break;
        }
        let un = match segment_field(metric, f, &xn, direction) {
            Ok(u) => u,
            Err(FinslerError::CriticalPoint { .. }) => {
                termination = "critical-point";
                break;
            }
            Err(e) => return Err(e),
        };
        let mut reached = false;
        let mut targets: Vec<f64> = options.levels.clone();
        if let Some(l) = options.until_level {
            targets.push(l);
        }
        for level in targets {
            if (fx - level) * (fn_ - level) <= 0.0 && fn_ != level || fn_ == level {
                let (mut lo, mut hi) = (0.0, h);
                let mut best = xn.clone();
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let xm = flow_step(metric, f, &x, mid, direction)?;
                    if sign * (f.eval(&xm) - level) >= 0.0 {
                        hi = mid;
                        best = xm;
                    } else {
                        lo = mid;
                    }
                }
                if Some(level) == options.until_level {
                    reached = true;
                }
                if options.levels.contains(&level) && !crossings.iter().any(|c| c.level_value == level) {
                    let v = segment_field(metric, f, &best, direction)?;
                    let basis = level_tangent_basis(&f.differential(&best));
                    crossings.push(CrossingEvent {
                        time: t + hi,
                        point: best.as_slice().to_vec(),
                        velocity: v.as_slice().to_vec(),
                        level_value: level,
                        arc_length: t + hi,
                        orthogonality_defect: orthogonality_defect_at(metric, &best, &v, &basis)?,
                    });
                }
            }
        }
        t += h;
        speed_residual = speed_residual.max((metric.eval_at(&xn, &un)? - 1.0).abs());
        if let Ok(r) = flow_residual(metric, f, &xn, &un, direction) {
            residual = residual.max(r);
        }
        samples.push(GeodesicSample { t, point: xn.as_slice().to_vec(), velocity: un.as_slice().to_vec(), arc_length: t });
        x = xn;
        fx = fn_;
        if reached {
            termination = "target-level";
            break;
        }
    }
    crossings.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    let values: Vec<f64> = samples.iter().map(|s| f.eval(&Vector::from_column_slice(&s.point))).collect();
    let strictly_monotone = values.windows(2).all(|w| sign * (w[1] - w[0]) > 0.0);
    Ok(FSegment {
        direction,
        trajectory: GeodesicTrajectory { samples },
        level_crossings: crossings,
        reparametrization_residual: speed_residual,
        is_geodesic: residual <= options.residual_tolerance,
        geodesic_residual: residual,
        strictly_monotone,
        termination: termination.to_string(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceCheck {
    pub from: f64,
    pub to: f64,
    pub geodesic_distance: f64,
    pub quadrature: f64,
    pub defect: f64,
    pub critical_end: bool,
    pub probes: usize,
    pub arrived: usize,
}

/// Shortest f-segment length from `f^{-1}(c)` to `f^{-1}(d)` against `int_c^d ds / sqrt(b)`.
/// A critical `d` is approached as a limit: the geodesic runs until `f` stops increasing.
#[allow(clippy::too_many_arguments)]
pub fn verify_distance_formula(
    metric: &MetricSpec,
    f: &ScalarField,
    sampler: &dyn LevelSampler,
    fit: &BFit,
    c: f64,
    d: f64,
    probes: usize,
    options: &GeodesicOptions,
) -> Result<DistanceCheck> {
    if !(c < d) {
        return Err(FinslerError::InvalidArgument(format!("need c < d, got c = {c}, d = {d}")));
    }
    if fit.is_critical_level(c) {
        return Err(FinslerError::IntervalContainsCriticalValue { c, d, value: c });
    }
    if let Some(v) = fit.critical_value_inside(c, d) {
        return Err(FinslerError::IntervalContainsCriticalValue { c, d, value: v });
    }
    let critical_end = fit.is_critical_level(d);
    let quadrature = fit.distance_integral(c, d)?;
    let sample = sampler.sample(f, c, probes)?;
    let arcs: Vec<Option<f64>> = sample
        .points
        .par_iter()
        .map(|p| {
            let x = p.to_vector();
            let g = gradient_vector(metric, f, &x).ok()?;
            let v = &g / metric.eval_at(&x, &g).ok()?;
            let v = TangentVector::at(&x, v);
            if critical_end {
                integrate_to_maximum(metric, &v, f, options).ok().map(|s| s.arc_length)
            } else {
                integrate_to_level(metric, &v, f, d, options).ok().map(|e| e.arc_length)
            }
        })
        .collect();
    let arrived: Vec<f64> = arcs.into_iter().flatten().collect();
    if arrived.is_empty() {
        return Err(FinslerError::NeverReached { target: d, reason: "no probe reached the target level".into() });
    }
    let geodesic_distance = arrived.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DistanceCheck {
        from: c,
        to: d,
        geodesic_distance,
        quadrature,
        defect: (geodesic_distance - quadrature).abs(),
        critical_end,
        probes: sample.len(),
        arrived: arrived.len(),
    })
}

/// `x -> g_{grad f(x)}`, a Riemannian metric field on the regular set.
#[derive(Clone)]
pub struct HatMetric {
    metric: MetricSpec,
    f: ScalarField,
}

impl HatMetric {
    pub fn new(metric: MetricSpec, f: ScalarField) -> Self {
        Self { metric, f }
    }

    pub fn try_value(&self, x: &Vector) -> Result<Matrix> {
        let g = gradient_vector(&self.metric, &self.f, x)?;
        self.metric.fundamental_matrix(x, &g)
    }
}

impl MatrixField for HatMetric {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn value(&self, x: &Vector) -> Matrix {
        self.try_value(x).unwrap_or_else(|_| Matrix::from_element(self.dim(), self.dim(), f64::NAN))
    }
}

/// `(|grad f - grad^ f|, |F(grad f) - F^(grad^ f)|)` with `g^ = g_{grad f}`.
pub fn check_hat_metric_reduction(metric: &MetricSpec, f: &ScalarField, p: &Point) -> Result<(f64, f64)> {
    let x = p.to_vector();
    let grad = gradient_vector(metric, f, &x)?;
    let ghat = metric.fundamental_matrix(&x, &grad)?;
    let df = f.differential(&x);
    let hat_grad = ghat.clone().cholesky().ok_or(FinslerError::SingularTensor)?.solve(&df);
    let hat_norm = hat_grad.dot(&(&ghat * &hat_grad)).max(0.0).sqrt();
    let z = metric.eval_at(&x, &grad)?;
    Ok(((&grad - &hat_grad).norm(), (z - hat_norm).abs()))
}

/// Largest separation between the F-geodesic and the `g^`-geodesic through `scale * grad f / F(grad f)`
/// over `[0, t_end]`.
pub fn check_hat_geodesic_agreement(
    metric: &MetricSpec,
    f: &ScalarField,
    p: &Point,
    scale: f64,
    t_end: f64,
    step: f64,
    domain: &Domain,
) -> Result<f64> {
    let x = p.to_vector();
    let g = gradient_vector(metric, f, &x)?;
    let v = &g * (scale / metric.eval_at(&x, &g)?);
    let v0 = TangentVector::at(&x, v);
    let finsler = integrate_geodesic(metric, &v0, t_end, step, domain)?;
    let hat = HatMetric::new(metric.clone(), f.clone());
    let riemann = integrate_riemannian_geodesic(&hat, &v0, t_end, step, domain)?;
    Ok(finsler
        .samples
        .iter()
        .zip(&riemann.samples)
        .map(|(a, b)| (Vector::from_column_slice(&a.point) - Vector::from_column_slice(&b.point)).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct HessianSample {
    pub point: Vec<f64>,
    pub level: f64,
    pub hessian: f64,
    pub expected: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HessianIdentityReport {
    pub samples: Vec<HessianSample>,
    pub max_defect: f64,
}

/// `Hess f(grad f, grad f)` against `b'(f) b(f) / 2`; defect `|2 Hess / b - b'| / (1 + |b'|)`.
pub fn check_hessian_identity(
    metric: &MetricSpec,
    f: &ScalarField,
    points: &[Vector],
    fit: &BFit,
) -> Result<HessianIdentityReport> {
    if points.is_empty() {
        return Err(FinslerError::EmptySample);
    }
    let samples: Vec<HessianSample> = points
        .par_iter()
        .map(|x| {
            let p = Point::from_vector(x);
            let hess = crate::calculus::hessian_along_gradient(metric, f, &p)?;
            let t = f.eval(x);
            let (b, bp) = (fit.value(t), fit.derivative(t));
            Ok(HessianSample {
                point: p.coords,
                level: t,
                hessian: hess,
                expected: 0.5 * bp * b,
                defect: (2.0 * hess / b - bp).abs() / (1.0 + bp.abs()),
            })
        })
        .collect::<Result<_>>()?;
    let max_defect = samples.iter().map(|s| s.defect).fold(0.0, f64::max);
    Ok(HessianIdentityReport { samples, max_defect })
}

#[derive(Debug, Clone, Serialize)]
pub struct MorseBottReport {
    pub critical_points: Vec<Point>,
    pub critical_values: Vec<f64>,
    pub hessians: Vec<Vec<Vec<f64>>>,
    pub kernel_dims: Vec<usize>,
    pub tangent_dims: Vec<usize>,
    pub transversal_nondegenerate: bool,
    /// `b'` at each critical value, from secant slopes of `F(grad f)^2 / (f - a)` near the point.
    pub b_prime_at_end: Vec<f64>,
    /// Slope of the global fit at each critical value.
    pub fit_slope_at_end: Vec<f64>,
    /// `Hess f(gamma', gamma')` along F-unit geodesics leaving each critical point.
    pub geodesic_hessians: Vec<Vec<f64>>,
    pub max_hessian_defect: f64,
    pub verdict: bool,
}

#[derive(Debug, Clone)]
pub struct MorseBottOptions {
    pub domain: Domain,
    pub kernel_threshold: f64,
    pub directions: usize,
    pub step: f64,
}

impl Default for MorseBottOptions {
    fn default() -> Self {
        Self { domain: Domain::Unbounded, kernel_threshold: 1e-6, directions: 8, step: 1e-4 }
    }
}

fn newton_critical(f: &ScalarField, seed: &Vector, domain: &Domain) -> Option<Vector> {
    let mut x = seed.clone();
    for _ in 0..60 {
        let df = f.differential(&x);
        if df.norm() <= 1e-12 {
            return domain.contains(&x).then_some(x);
        }
        let h = f.hessian(&x);
        let step = h.svd(true, true).solve(&df, 1e-12).ok()?;
        x -= step;
        if !domain.contains(&x) {
            return None;
        }
    }
    (f.differential(&x).norm() <= 1e-10).then_some(x)
}

fn unit_directions(dim: usize, count: usize) -> Vec<Vector> {
    if dim == 2 {
        return (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                Vector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect();
    }
    let mut out = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            out.push(Vector::from_fn(dim, |j, _| if i == j { s } else { 0.0 }));
        }
    }
    out
}

fn numerical_rank(vectors: &[Vector], dim: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = Matrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i] / vectors[j].norm());
    let sv = m.svd(false, false).singular_values;
    let max = sv.max();
    sv.iter().filter(|s| **s > 0.2 * max).count()
}

/// Locates critical points from seeds and checks the Morse-Bott conditions there.
pub fn check_morse_bott(
    metric: &MetricSpec,
    f: &ScalarField,
    seeds: &[Vector],
    options: &MorseBottOptions,
) -> Result<MorseBottReport> {
    let mut found: Vec<Vector> = Vec::new();
    for s in seeds {
        if let Some(p) = newton_critical(f, s, &options.domain) {
            if found.iter().all(|q| (q - &p).norm() > 1e-6) {
                found.push(p);
            }
        }
    }
    if found.is_empty() {
        return Err(FinslerError::NoCriticalPoint { seeds: seeds.len() });
    }
    found.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.partial_cmp(y).unwrap()).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let n = f.dim();
    let mut report = MorseBottReport {
        critical_points: Vec::new(),
        critical_values: Vec::new(),
        hessians: Vec::new(),
        kernel_dims: Vec::new(),
        tangent_dims: Vec::new(),
        transversal_nondegenerate: true,
        b_prime_at_end: Vec::new(),
        fit_slope_at_end: Vec::new(),
        geodesic_hessians: Vec::new(),
        max_hessian_defect: 0.0,
        verdict: true,
    };
    for p in &found {
        let hess = f.hessian(p);
        let hess = (&hess + hess.transpose()) * 0.5;
        let eig = SymmetricEigen::new(hess.clone()).eigenvalues;
        let kernel = eig.iter().filter(|l| l.abs() < options.kernel_threshold).count();
        let rho = 0.05;
        let displacements: Vec<Vector> = unit_directions(n, 8)
            .iter()
            .filter_map(|u| newton_critical(f, &(p + u * rho), &options.domain))
            .map(|q| q - p)
            .filter(|d| d.norm() > 1e-6 && d.norm() < 2.0 * rho)
            .collect();
        let tangent = numerical_rank(&displacements, n);
        // Normal space: orthogonal complement of the detected tangent directions.
        let mut normal: Vec<Vector> = Vec::new();
        let tangent_basis = if tangent > 0 {
            let m = Matrix::from_fn(n, displacements.len(), |i, j| displacements[j][i]);
            let svd = m.svd(true, false);
            let u = svd.u.unwrap();
            (0..tangent).map(|k| u.column(k).into_owned()).collect::<Vec<_>>()
        } else {
            Vec::new()
        };
        for i in 0..n {
            let mut e = Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
            for b in tangent_basis.iter().chain(normal.iter()) {
                e -= b * b.dot(&e);
            }
            if e.norm() > 1e-8 && normal.len() < n - tangent {
                normal.push(e.normalize());
            }
        }
        let restricted = Matrix::from_fn(normal.len(), normal.len(), |i, j| normal[i].dot(&(&hess * &normal[j])));
        let nondeg = normal.is_empty()
            || SymmetricEigen::new(restricted).eigenvalues.iter().all(|l| l.abs() >= options.kernel_threshold);
        report.transversal_nondegenerate &= nondeg;
        report.verdict &= nondeg && kernel == tangent;

        let a = f.eval(p);
        let dirs: Vec<Vector> = if normal.len() == n {
            unit_directions(n, options.directions)
        } else {
            normal.iter().flat_map(|v| [v.clone(), -v]).collect()
        };
        let unit: Vec<Vector> =
            dirs.iter().map(|u| Ok(u / metric.eval_at(p, u)?)).collect::<Result<_>>()?;
        let b_prime = local_b_slope(metric, f, p, a, &unit)?;
        let tau = 1e-2;
        let geo: Vec<f64> = unit
            .par_iter()
            .map(|v| {
                let est = |t: f64| -> Result<f64> {
                    let tr = integrate_geodesic(metric, &TangentVector::at(p, v.clone()), t, options.step, &Domain::Unbounded)?;
                    Ok(2.0 * (f.eval(&tr.endpoint().to_vector()) - a) / (t * t))
                };
                Ok(2.0 * est(tau)? - est(2.0 * tau)?)
            })
            .collect::<Result<_>>()?;
        let defect = geo.iter().map(|h| (h - 0.5 * b_prime).abs()).fold(0.0, f64::max);
        report.max_hessian_defect = report.max_hessian_defect.max(defect);
        report.critical_points.push(Point::from_vector(p));
        report.critical_values.push(a);
        report.hessians.push((0..n).map(|i| (0..n).map(|j| hess[(i, j)]).collect()).collect());
        report.kernel_dims.push(kernel);
        report.tangent_dims.push(tangent);
        report.b_prime_at_end.push(b_prime);
        report.geodesic_hessians.push(geo);
    }
    Ok(report)
}

/// `b'(a)` from `F(grad f)^2 / (f - a)` at `p + eps u`, Richardson-extrapolated in `eps`.
fn local_b_slope(metric: &MetricSpec, f: &ScalarField, p: &Vector, a: f64, dirs: &[Vector]) -> Result<f64> {
    let ratio = |x: Vector| -> Result<f64> {
        let g = gradient_vector(metric, f, &x)?;
        let z = metric.eval_at(&x, &g)?;
        Ok(z * z / (f.eval(&x) - a))
    };
    let mut total = 0.0;
    for u in dirs {
        let eps = 1e-3;
        let q1 = ratio(p + u * eps)?;
        let q2 = ratio(p + u * (0.5 * eps))?;
        total += 2.0 * q2 - q1;
    }
    Ok(total / dirs.len() as f64)
}

/// Attaches the global-fit slopes at the critical values of a Morse-Bott report.
pub fn attach_fit_slopes(report: &mut MorseBottReport, fit: &BFit) {
    report.fit_slope_at_end = report.critical_values.iter().map(|a| fit.derivative(*a)).collect();
}

/// Ready-made `Arc` wrapper so the hat metric can be shared across threads.
pub fn hat_metric(metric: &MetricSpec, f: &ScalarField) -> Arc<dyn MatrixField> {
    Arc::new(HatMetric::new(metric.clone(), f.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{ExprFunction, Expression};

    fn field(text: &str) -> ScalarField {
        ScalarField::new(text, Arc::new(ExprFunction::new(Expression::parse(text).unwrap(), 2).unwrap()))
    }

    fn line_samples() -> Vec<Vector> {
        (0..20).flat_map(|i| (0..5).map(move |j| Vector::from_vec(vec![i as f64 * 0.1, j as f64 * 0.2]))).collect()
    }

    #[test]
    fn linear_function_is_transnormal_with_unit_b() {
        let f = field("x");
        let r = check_transnormal(&MetricSpec::euclidean(2), &f, &line_samples(), &TransnormalOptions::default()).unwrap();
        assert!(r.verdict);
        assert!(r.spread_per_level < 1e-14);
        assert!((r.b_fit.value(0.55) - 1.0).abs() < 1e-14);
        assert!(r.b_table.windows(2).all(|w| w[0].level < w[1].level));
    }

    #[test]
    fn empty_sample_is_an_error() {
        let err = check_transnormal(&MetricSpec::euclidean(2), &field("x"), &[], &TransnormalOptions::default());
        assert_eq!(err.unwrap_err(), FinslerError::EmptySample);
    }

    #[test]
    fn non_transnormal_function_fails() {
        let f = field("x^2 + 3*y^2");
        let pts: Vec<Vector> = (1..40)
            .flat_map(|i| {
                let r = i as f64 * 0.02;
                (0..6).map(move |k| {
                    let th = k as f64;
                    Vector::from_vec(vec![r * th.cos(), r * th.sin() / 3f64.sqrt()])
                })
            })
            .collect();
        let r = check_transnormal(&MetricSpec::euclidean(2), &f, &pts, &TransnormalOptions::default()).unwrap();
        assert!(!r.verdict);
    }

    #[test]
    fn distance_integral_with_critical_end() {
        let nodes: Vec<(f64, f64)> = (0..=400).map(|i| {
            let z = -1.0 + i as f64 * 0.005;
            (z, 1.0 - z * z)
        }).collect();
        let fit = BFit::from_nodes(nodes, vec![-1.0, 1.0], (-0.995, 0.995));
        let v = fit.distance_integral(0.0, 1.0).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-5, "{v}");
        assert!(fit.distance_integral(-0.5, 1.0).is_ok());
        let s = fit.level_at_distance_from_critical(1.0, 0.5, true).unwrap();
        assert!((s - 0.5f64.cos()).abs() < 1e-5, "{s}");
    }

    #[test]
    fn critical_value_inside_is_rejected() {
        let nodes: Vec<(f64, f64)> = (0..=200).map(|i| {
            let z = -1.0 + i as f64 * 0.01;
            (z, 1.0 - z * z)
        }).collect();
        let fit = BFit::from_nodes(nodes, vec![-1.0, 1.0], (-0.99, 0.99));
        assert!(fit.critical_value_inside(-0.5, 0.5).is_none());
        let wide = BFit::from_nodes(vec![(0.0, 1.0), (1.0, 0.0), (2.0, 1.0)], vec![1.0], (0.0, 2.0));
        assert!(matches!(
            wide.distance_integral(0.0, 2.0),
            Err(FinslerError::IntervalContainsCriticalValue { .. })
        ));
    }

    #[test]
    fn euclidean_segment_is_a_straight_line() {
        let f = field("x + 2*y");
        let opts = SegmentOptions { max_length: 0.5, levels: vec![0.5, 1.0], ..SegmentOptions::default() };
        let seg = trace_f_segment(&MetricSpec::euclidean(2), &f, &Point::new(vec![0.0, 0.0]), Direction::Forward, &opts).unwrap();
        assert!(seg.is_geodesic && seg.strictly_monotone);
        assert!(seg.reparametrization_residual < 1e-12);
        assert_eq!(seg.level_crossings.len(), 2);
        let c = &seg.level_crossings[0];
        assert!((c.time - 0.5 / 5f64.sqrt()).abs() < 1e-10);
        assert!(c.orthogonality_defect < 1e-12);
    }

    #[test]
    fn hat_metric_is_h_for_riemannian_metrics() {
        let f = field("x^2 + y");
        let (a, b) = check_hat_metric_reduction(&MetricSpec::euclidean(2), &f, &Point::new(vec![0.3, 0.2])).unwrap();
        assert!(a < 1e-14 && b < 1e-14);
    }

    #[test]
    fn morse_bott_on_paraboloid_and_line() {
        let f = field("x^2 + y^2");
        let seeds = vec![Vector::from_vec(vec![0.3, -0.2])];
        let r = check_morse_bott(&MetricSpec::euclidean(2), &f, &seeds, &MorseBottOptions::default()).unwrap();
        assert_eq!(r.critical_points.len(), 1);
        assert_eq!((r.kernel_dims[0], r.tangent_dims[0]), (0, 0));
        assert!(r.verdict);
        assert!((r.b_prime_at_end[0] - 4.0).abs() < 1e-6);
        assert!(r.max_hessian_defect < 1e-3);
        let err = check_morse_bott(&MetricSpec::euclidean(2), &field("x"), &seeds, &MorseBottOptions::default());
        assert!(matches!(err, Err(FinslerError::NoCriticalPoint { .. })));
    }

    #[test]
    fn morse_bott_critical_circle() {
        // Critical circle r = 1: kernel and tangent dimension both 1.
        let f = field("(x^2 + y^2 - 1)^2");
        let seeds = vec![Vector::from_vec(vec![1.1, 0.05])];
        let r = check_morse_bott(&MetricSpec::euclidean(2), &f, &seeds, &MorseBottOptions::default()).unwrap();
        assert_eq!((r.kernel_dims[0], r.tangent_dims[0]), (1, 1));
        assert!(r.transversal_nondegenerate && r.verdict);
    }
}

//! Level sets, orthogonal cones, forward/backward parallelism, cylinders and
//! the Finsler-partition verdict for the level-set partition of `f`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::legendre_inverse_at;
use crate::domain::Domain;
use crate::error::{FinslerError, Result};
use crate::field::{ScalarField, Vector};
use crate::geodesic::{
    integrate_geodesic, integrate_to_level, level_tangent_basis, orthogonality_defect_at, GeodesicOptions,
};
use crate::metric::{MetricSpec, Point, TangentVector};
use crate::transnormal::BFit;

/// Pass threshold for parallelism defects.
pub const PARALLEL_PASS_TOLERANCE: f64 = 1e-4;
/// Defects at or above this are a clear failure; between the two the verdict is inconclusive.
pub const PARALLEL_FAIL_THRESHOLD: f64 = 0.05;

const PROJECTION_MAX_ITERATIONS: usize = 25;
const LEVEL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetSample {
    pub level: f64,
    pub points: Vec<Point>,
    #[serde(skip)]
    pub tangent_bases: Vec<Vec<Vector>>,
}

impl LevelSetSample {
    /// Polishes `points` onto `f = level` and attaches tangent bases.
    pub fn from_points(f: &ScalarField, level: f64, points: Vec<Vector>) -> Result<Self> {
        let mut out = Vec::with_capacity(points.len());
        let mut bases = Vec::with_capacity(points.len());
        for p in points {
            let q = project_to_level(f, level, p).ok_or(FinslerError::LevelNotFound { level })?;
            bases.push(level_tangent_basis(&f.differential(&q)));
            out.push(Point::from_vector(&q));
        }
        Ok(Self { level, points: out, tangent_bases: bases })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest distance between two distinct sample points.
    pub fn min_spacing(&self) -> f64 {
        min_pairwise_distance(&self.points.iter().map(Point::to_vector).collect::<Vec<_>>())
    }
}

/// Newton projection along `df`; `None` when it fails to reach `|f - level| <= 1e-10`.
pub fn project_to_level(f: &ScalarField, level: f64, mut x: Vector) -> Option<Vector> {
    let mut r = f.eval(&x) - level;
    let stop = 1e-15 * level.abs().max(1e-3);
    for _ in 0..PROJECTION_MAX_ITERATIONS {
        if !r.is_finite() {
            return None;
        }
        if r.abs() <= stop {
            break;
        }
        let df = f.differential(&x);
        let n2 = df.norm_squared();
        if n2 == 0.0 || !n2.is_finite() {
            return None;
        }
        let trial = &x - &df * (r / n2);
        let rt = f.eval(&trial) - level;
        if !(rt.abs() < r.abs()) {
            break;
        }
        x = trial;
        r = rt;
    }
    (r.abs() <= LEVEL_TOLERANCE && x.iter().all(|c| c.is_finite())).then_some(x)
}

pub fn min_pairwise_distance(points: &[Vector]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((&points[i] - &points[j]).norm());
        }
    }
    best
}

/// Samples `n` points of `f^{-1}(c)` inside `domain`: grid-edge brackets, Newton
/// projection, then farthest-point selection for even spread.
pub fn extract_level_set(f: &ScalarField, c: f64, domain: &Domain, n: usize) -> Result<LevelSetSample> {
    let dim = f.dim();
    let extent = domain.extent().unwrap_or(10.0);
    let per_axis: usize = match dim {
        1 => 2001,
        2 => 241,
        3 => 41,
        _ => 11,
    };
    let coord = |i: usize| -extent + 2.0 * extent * i as f64 / (per_axis - 1) as f64;
    let total = per_axis.pow(dim as u32);
    let index_to_point = |mut idx: usize| {
        let mut v = Vector::zeros(dim);
        for k in 0..dim {
            v[k] = coord(idx % per_axis);
            idx /= per_axis;
        }
        v
    };
    let values: Vec<f64> = (0..total).into_par_iter().map(|i| f.eval(&index_to_point(i)) - c).collect();
    let mut seeds = Vec::new();
    for idx in 0..total {
        let mut stride = 1;
        let mut rem = idx;
        for _ in 0..dim {
            let digit = rem % per_axis;
            rem /= per_axis;
            if digit + 1 < per_axis {
                let (a, b) = (values[idx], values[idx + stride]);
                if a.is_finite() && b.is_finite() && (a == 0.0 || a * b < 0.0) {
                    let pa = index_to_point(idx);
                    let pb = index_to_point(idx + stride);
                    let t = if a == b { 0.5 } else { a / (a - b) };
                    seeds.push(&pa + (pb - &pa) * t);
                }
            }
            stride *= per_axis;
        }
    }
    let projected: Vec<Vector> = seeds
        .into_par_iter()
        .filter_map(|s| project_to_level(f, c, s))
        .filter(|p| domain.contains(p) && f.differential(p).norm() > 0.0)
        .collect();
    if projected.is_empty() {
        return Err(FinslerError::LevelNotFound { level: c });
    }
    let chosen = farthest_point_selection(&projected, n);
    LevelSetSample::from_points(f, c, chosen)
}

fn farthest_point_selection(points: &[Vector], n: usize) -> Vec<Vector> {
    let start = points
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.iter().zip(b.iter()).map(|(x, y)| x.partial_cmp(y).unwrap()).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut chosen = vec![start];
    let mut dist: Vec<f64> = points.iter().map(|p| (p - &points[start]).norm()).collect();
    while chosen.len() < n.min(points.len()) {
        let (next, d) = dist
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, d)| if *d > acc.1 { (i, *d) } else { acc });
        if d <= 0.0 {
            break;
        }
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min((p - &points[next]).norm());
        }
    }
    let mut out: Vec<Vector> = chosen.into_iter().map(|i| points[i].clone()).collect();
    if out.first().map(|p| p.len() == 2).unwrap_or(false) {
        let centroid = out.iter().fold(Vector::zeros(2), |acc, p| acc + p) / out.len() as f64;
        out.sort_by(|a, b| {
            let ta = (a[1] - centroid[1]).atan2(a[0] - centroid[0]);
            let tb = (b[1] - centroid[1]).atan2(b[0] - centroid[0]);
            ta.partial_cmp(&tb).unwrap()
        });
    }
    out
}

/// Source of level-set samples: generic contouring or a known parametrization.
pub trait LevelSampler: Send + Sync {
    fn sample(&self, f: &ScalarField, level: f64, n: usize) -> Result<LevelSetSample>;
}

/// Contouring-based sampler over a chart domain.
pub struct GridLevelSampler {
    pub domain: Domain,
}

impl LevelSampler for GridLevelSampler {
    fn sample(&self, f: &ScalarField, level: f64, n: usize) -> Result<LevelSetSample> {
        extract_level_set(f, level, &self.domain, n)
    }
}

/// Sampler from an analytic parametrization `(level, n) -> points`, Newton-polished.
#[derive(Clone)]
pub struct ParametricLevelSampler {
    param: Arc<dyn Fn(f64, usize) -> Option<Vec<Vector>> + Send + Sync>,
}

impl ParametricLevelSampler {
    pub fn new<F>(param: F) -> Self
    where
        F: Fn(f64, usize) -> Option<Vec<Vector>> + Send + Sync + 'static,
    {
        Self { param: Arc::new(param) }
    }
}

impl LevelSampler for ParametricLevelSampler {
    fn sample(&self, f: &ScalarField, level: f64, n: usize) -> Result<LevelSetSample> {
        let pts = (self.param)(level, n).ok_or(FinslerError::LevelNotFound { level })?;
        LevelSetSample::from_points(f, level, pts)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalCone {
    pub at: Point,
    pub forward_ray: Vec<f64>,
    pub backward_ray: Vec<f64>,
}

impl OrthogonalCone {
    pub fn forward(&self) -> TangentVector {
        TangentVector { base: self.at.clone(), components: Vector::from_column_slice(&self.forward_ray) }
    }

    pub fn backward(&self) -> TangentVector {
        TangentVector { base: self.at.clone(), components: Vector::from_column_slice(&self.backward_ray) }
    }

    pub fn ray(&self, direction: Direction) -> TangentVector {
        match direction {
            Direction::Forward => self.forward(),
            Direction::Backward => self.backward(),
        }
    }

    /// Euclidean angle between the backward ray and the reversed forward ray.
    pub fn antiparallel_angle(&self) -> f64 {
        let a = Vector::from_column_slice(&self.forward_ray);
        let b = Vector::from_column_slice(&self.backward_ray);
        let cos = (-a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0);
        cos.acos()
    }
}

/// F-unit rays orthogonal to the level set through `p`: `L^{-1}(+df)` and `L^{-1}(-df)`.
pub fn orthogonal_cone(metric: &MetricSpec, f: &ScalarField, p: &Point) -> Result<OrthogonalCone> {
    let x = p.to_vector();
    let df = f.differential(&x);
    if !(df.norm() >= crate::calculus::DEFAULT_CRITICAL_THRESHOLD) {
        return Err(FinslerError::CriticalPoint { at: p.coords.clone(), df_norm: df.norm() });
    }
    let (fw, _) = legendre_inverse_at(metric, &x, &df)?;
    let (bw, _) = legendre_inverse_at(metric, &x, &(-&df))?;
    let fw = &fw / metric.eval_at(&x, &fw)?;
    let bw = &bw / metric.eval_at(&x, &bw)?;
    Ok(OrthogonalCone { at: p.clone(), forward_ray: fw.as_slice().to_vec(), backward_ray: bw.as_slice().to_vec() })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeOutcome {
    pub start: Vec<f64>,
    pub arrived: bool,
    pub defect: Option<f64>,
    pub arc_length: Option<f64>,
    pub end: Option<Vec<f64>>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelismReport {
    pub direction: Direction,
    pub source_level: f64,
    pub target_level: f64,
    pub probes: Vec<ProbeOutcome>,
    pub per_probe_defects: Vec<f64>,
    pub max_defect: f64,
    pub arrived: usize,
    pub tolerance: f64,
    pub classification: String,
    pub verdict: bool,
}

#[derive(Debug, Clone)]
pub struct ParallelOptions {
    pub geodesic: GeodesicOptions,
    pub tolerance: f64,
}

impl ParallelOptions {
    pub fn new(geodesic: GeodesicOptions) -> Self {
        Self { geodesic, tolerance: PARALLEL_PASS_TOLERANCE }
    }
}

/// Launches orthogonal geodesics from one level and measures orthogonality on arrival at the other.
/// Forward probes start on the lower level along forward rays; backward probes start on the upper
/// level along backward rays.
pub fn check_parallel(
    metric: &MetricSpec,
    f: &ScalarField,
    sampler: &dyn LevelSampler,
    c: f64,
    d: f64,
    direction: Direction,
    probes: usize,
    options: &ParallelOptions,
) -> Result<ParallelismReport> {
    if c == d {
        return Err(FinslerError::InvalidArgument("levels must differ".into()));
    }
    let (lo, hi) = if c < d { (c, d) } else { (d, c) };
    let (source, target) = match direction {
        Direction::Forward => (lo, hi),
        Direction::Backward => (hi, lo),
    };
    let sample = sampler.sample(f, source, probes)?;
    let outcomes: Vec<ProbeOutcome> = sample
        .points
        .par_iter()
        .map(|p| {
            let start = p.coords.clone();
            let fail = |note: String| ProbeOutcome { start: start.clone(), arrived: false, defect: None, arc_length: None, end: None, note: Some(note) };
            let cone = match orthogonal_cone(metric, f, p) {
                Ok(c) => c,
                Err(e) => return fail(e.to_string()),
            };
            match integrate_to_level(metric, &cone.ray(direction), f, target, &options.geodesic) {
                Ok(ev) => ProbeOutcome {
                    start,
                    arrived: true,
                    defect: Some(ev.orthogonality_defect),
                    arc_length: Some(ev.arc_length),
                    end: Some(ev.point),
                    note: None,
                },
                Err(e) => fail(e.to_string()),
            }
        })
        .collect();
    let defects: Vec<f64> = outcomes.iter().filter_map(|o| o.defect).collect();
    if defects.is_empty() {
        return Err(FinslerError::NeverReached {
            target,
            reason: format!("none of {} probes from level {source} arrived", outcomes.len()),
        });
    }
    let max_defect = defects.iter().cloned().fold(0.0, f64::max);
    let classification = if max_defect <= options.tolerance {
        "parallel"
    } else if max_defect >= PARALLEL_FAIL_THRESHOLD {
        "not-parallel"
    } else {
        "inconclusive"
    };
    Ok(ParallelismReport {
        direction,
        source_level: source,
        target_level: target,
        arrived: defects.len(),
        per_probe_defects: defects,
        probes: outcomes,
        max_defect,
        tolerance: options.tolerance,
        classification: classification.to_string(),
        verdict: max_defect <= options.tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CylinderResult {
    pub radius: f64,
    pub direction: Direction,
    pub points: Vec<Option<Point>>,
    pub failures: usize,
    /// `max f - min f` over the landed points.
    pub f_spread: f64,
}

/// Images `exp(r * ray)` of the F-unit forward (future) or backward (past) orthogonal rays.
pub fn build_cylinder(
    metric: &MetricSpec,
    f: &ScalarField,
    source: &LevelSetSample,
    r: f64,
    direction: Direction,
    options: &GeodesicOptions,
) -> Result<CylinderResult> {
    if r < 0.0 {
        return Err(FinslerError::InvalidArgument("cylinder radius must be non-negative".into()));
    }
    let points: Vec<Option<Point>> = source
        .points
        .par_iter()
        .map(|p| {
            if r == 0.0 {
                return Some(p.clone());
            }
            let cone = orthogonal_cone(metric, f, p).ok()?;
            let tr = integrate_geodesic(metric, &cone.ray(direction), r, options.step, &options.domain).ok()?;
            Some(tr.endpoint())
        })
        .collect();
    let values: Vec<f64> = points.iter().flatten().map(|p| f.eval(&p.to_vector())).collect();
    let spread = spread(&values);
    Ok(CylinderResult { radius: r, direction, failures: points.iter().filter(|p| p.is_none()).count(), points, f_spread: spread })
}

fn spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

#[derive(Debug, Clone, Serialize)]
pub struct EndPointMap {
    pub t: f64,
    pub images: Vec<Point>,
    pub f_values: Vec<f64>,
    pub f_spread: f64,
    pub min_pairwise_distance: f64,
    pub source_min_spacing: f64,
}

/// `eta(x) = exp_x(t xi)` with `xi = grad f / F(grad f)` over the source level.
pub fn end_point_map(
    metric: &MetricSpec,
    f: &ScalarField,
    source: &LevelSetSample,
    t: f64,
    options: &GeodesicOptions,
) -> Result<EndPointMap> {
    let images: Vec<Point> = source
        .points
        .par_iter()
        .map(|p| {
            if t == 0.0 {
                return Ok(p.clone());
            }
            let cone = orthogonal_cone(metric, f, p)?;
            Ok(integrate_geodesic(metric, &cone.forward(), t, options.step, &options.domain)?.endpoint())
        })
        .collect::<Result<_>>()?;
    let f_values: Vec<f64> = images.iter().map(|p| f.eval(&p.to_vector())).collect();
    let vecs: Vec<Vector> = images.iter().map(Point::to_vector).collect();
    Ok(EndPointMap {
        t,
        f_spread: spread(&f_values),
        min_pairwise_distance: min_pairwise_distance(&vecs),
        source_min_spacing: source.min_spacing(),
        images,
        f_values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CylinderOverCritical {
    pub center: Vec<f64>,
    pub radius: f64,
    pub predicted_level: f64,
    pub f_values: Vec<f64>,
    pub max_defect: f64,
}

/// Forward cylinder of radius `r` over an isolated critical point: images of every F-unit
/// direction, compared against the level predicted by inverting the distance integral.
pub fn cylinder_over_critical_point(
    metric: &MetricSpec,
    f: &ScalarField,
    center: &Point,
    r: f64,
    directions: usize,
    fit: &BFit,
    options: &GeodesicOptions,
) -> Result<CylinderOverCritical> {
    let x = center.to_vector();
    if x.len() != 2 {
        return Err(FinslerError::InvalidArgument("critical-point cylinders are implemented for surfaces".into()));
    }
    let a = f.eval(&x);
    let f_values: Vec<f64> = (0..directions)
        .into_par_iter()
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / directions as f64;
            let u = Vector::from_vec(vec![th.cos(), th.sin()]);
            let v = &u / metric.eval_at(&x, &u)?;
            let tr = integrate_geodesic(metric, &TangentVector::at(&x, v), r, options.step, &options.domain)?;
            Ok(f.eval(&tr.endpoint().to_vector()))
        })
        .collect::<Result<_>>()?;
    // Levels move away from `a` in the direction the samples went.
    let downhill = f_values.iter().sum::<f64>() / f_values.len() as f64 <= a;
    let predicted_level = fit.level_at_distance_from_critical(a, r, downhill)?;
    let max_defect = f_values.iter().map(|v| (v - predicted_level).abs()).fold(0.0, f64::max);
    Ok(CylinderOverCritical { center: center.coords.clone(), radius: r, predicted_level, f_values, max_defect })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub levels: Vec<f64>,
    pub forward: Vec<ParallelismReport>,
    pub backward: Vec<ParallelismReport>,
    pub cylinder_match_defects: Vec<f64>,
    pub forward_parallel: bool,
    pub backward_parallel: bool,
    pub finsler_partition_verdict: bool,
    pub assumptions: Vec<String>,
}

/// Forward and backward parallelism between adjacent levels plus cylinder/level coincidence.
pub fn check_finsler_partition(
    metric: &MetricSpec,
    f: &ScalarField,
    sampler: &dyn LevelSampler,
    levels: &[f64],
    probes: usize,
    options: &ParallelOptions,
) -> Result<PartitionReport> {
    let mut levels = levels.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    if levels.len() < 2 {
        return Err(FinslerError::InvalidArgument("need at least two levels".into()));
    }
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let mut cylinder_match_defects = Vec::new();
    for pair in levels.windows(2) {
        let (c, d) = (pair[0], pair[1]);
        let fw = check_parallel(metric, f, sampler, c, d, Direction::Forward, probes, options)?;
        let bw = match check_parallel(metric, f, sampler, c, d, Direction::Backward, probes, options) {
            Ok(r) => r,
            Err(FinslerError::NeverReached { .. }) => ParallelismReport {
                direction: Direction::Backward,
                source_level: d,
                target_level: c,
                probes: Vec::new(),
                per_probe_defects: Vec::new(),
                max_defect: f64::INFINITY,
                arrived: 0,
                tolerance: options.tolerance,
                classification: "not-parallel".into(),
                verdict: false,
            },
            Err(e) => return Err(e),
        };
        for (report, source, target, dir) in [(&fw, c, d, Direction::Forward), (&bw, d, c, Direction::Backward)] {
            let arcs: Vec<f64> = report.probes.iter().filter_map(|p| p.arc_length).collect();
            let defect = if arcs.is_empty() {
                f64::INFINITY
            } else {
                let r = arcs.iter().cloned().fold(f64::INFINITY, f64::min);
                let src = sampler.sample(f, source, probes)?;
                let cyl = build_cylinder(metric, f, &src, r, dir, &options.geodesic)?;
                let landed: Vec<f64> =
                    cyl.points.iter().flatten().map(|p| (f.eval(&p.to_vector()) - target).abs()).collect();
                if landed.is_empty() {
                    f64::INFINITY
                } else {
                    landed.into_iter().fold(0.0, f64::max)
                }
            };
            cylinder_match_defects.push(defect);
        }
        forward.push(fw);
        backward.push(bw);
    }
    let forward_parallel = forward.iter().all(|r| r.verdict);
    let backward_parallel = backward.iter().all(|r| r.verdict);
    let cylinders = cylinder_match_defects.iter().all(|d| *d <= options.tolerance);
    Ok(PartitionReport {
        levels,
        forward,
        backward,
        cylinder_match_defects,
        forward_parallel,
        backward_parallel,
        finsler_partition_verdict: forward_parallel && backward_parallel && cylinders,
        assumptions: vec!["analyticity and compactness of the data are assumed, not verified".into()],
    })
}

/// Orthogonality defect of a single velocity against the level set through its base point.
pub fn level_orthogonality_defect(metric: &MetricSpec, f: &ScalarField, v: &TangentVector) -> Result<f64> {
    let x = v.base.to_vector();
    let basis = level_tangent_basis(&f.differential(&x));
    orthogonality_defect_at(metric, &x, &v.components, &basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{ExprFunction, Expression};

    fn field(text: &str) -> ScalarField {
        ScalarField::new(text, Arc::new(ExprFunction::new(Expression::parse(text).unwrap(), 2).unwrap()))
    }

    #[test]
    fn circle_level_set() {
        let f = field("x^2 + y^2");
        let s = extract_level_set(&f, 0.25, &Domain::Disc { radius: 0.9 }, 64).unwrap();
        assert_eq!(s.len(), 64);
        for p in &s.points {
            let x = p.to_vector();
            assert!((f.eval(&x) - 0.25).abs() <= 1e-10);
            assert!((x.norm() - 0.5).abs() < 1e-9);
        }
        for (p, b) in s.points.iter().zip(&s.tangent_bases) {
            assert!(f.differential(&p.to_vector()).dot(&b[0]).abs() < 1e-8);
        }
        // Evenly spread: spacing close to the regular 64-gon side.
        let side = 2.0 * 0.5 * (std::f64::consts::PI / 64.0).sin();
        assert!(s.min_spacing() > 0.5 * side);
    }

    #[test]
    fn missing_level() {
        let f = field("x^2 + y^2");
        let err = extract_level_set(&f, 2.0, &Domain::Disc { radius: 0.9 }, 8).unwrap_err();
        assert_eq!(err, FinslerError::LevelNotFound { level: 2.0 });
    }

    #[test]
    fn riemannian_cone_is_a_line() {
        let f = field("x^2 + 3*y");
        let cone = orthogonal_cone(&MetricSpec::euclidean(2), &f, &Point::new(vec![0.3, 0.1])).unwrap();
        assert!(cone.antiparallel_angle() < 1e-12);
    }

    #[test]
    fn zero_radius_cylinder_and_zero_time_map() {
        let f = field("x^2 + y^2");
        let m = MetricSpec::euclidean(2);
        let s = extract_level_set(&f, 0.25, &Domain::Disc { radius: 0.9 }, 8).unwrap();
        let cyl = build_cylinder(&m, &f, &s, 0.0, Direction::Forward, &GeodesicOptions::default()).unwrap();
        for (a, b) in cyl.points.iter().zip(&s.points) {
            assert_eq!(a.as_ref().unwrap(), b);
        }
        let eta = end_point_map(&m, &f, &s, 0.0, &GeodesicOptions::default()).unwrap();
        assert_eq!(eta.images, s.points);
    }
}

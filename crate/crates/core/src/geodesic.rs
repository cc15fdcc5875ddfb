//! Geodesic spray, fixed-step RK4 integration, exponential map and
//! event-driven integration to level-set crossings.

use std::fmt::Write as _;

use serde::Serialize;

use crate::domain::Domain;
use crate::error::{FinslerError, Result};
use crate::field::{Matrix, MatrixField, ScalarField, Vector};
use crate::metric::{DerivativeMode, MetricSpec, NormJet, Point, TangentVector};

pub const DEFAULT_STEP: f64 = 1e-3;
const BISECTION_STEPS: usize = 80;

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicOptions {
    pub step: f64,
    /// Time budget for event-driven integration.
    pub t_max: f64,
    pub domain: Domain,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self { step: DEFAULT_STEP, t_max: 50.0, domain: Domain::Unbounded }
    }
}

impl GeodesicOptions {
    pub fn new(step: f64, domain: Domain) -> Self {
        Self { step, domain, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    pub arc_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicTrajectory {
    pub samples: Vec<GeodesicSample>,
}

impl GeodesicTrajectory {
    pub fn endpoint(&self) -> Point {
        Point::new(self.samples.last().map(|s| s.point.clone()).unwrap_or_default())
    }

    pub fn arc_length(&self) -> f64 {
        self.samples.last().map(|s| s.arc_length).unwrap_or(0.0)
    }

    /// `max |F(v(t)) - F(v(0))|` over the samples.
    pub fn speed_drift(&self, metric: &MetricSpec) -> Result<f64> {
        let speed = |s: &GeodesicSample| {
            metric.eval_at(&Vector::from_column_slice(&s.point), &Vector::from_column_slice(&s.velocity))
        };
        let Some(first) = self.samples.first() else { return Ok(0.0) };
        let s0 = speed(first)?;
        let mut drift: f64 = 0.0;
        for s in &self.samples {
            drift = drift.max((speed(s)? - s0).abs());
        }
        Ok(drift)
    }

    /// CSV with columns `t, x0.., v0.., arc_length`.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map(|s| s.point.len()).unwrap_or(0);
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, ",x{i}");
        }
        for i in 0..n {
            let _ = write!(out, ",v{i}");
        }
        out.push_str(",arc_length\n");
        for s in &self.samples {
            let _ = write!(out, "{:?}", s.t);
            for c in s.point.iter().chain(&s.velocity) {
                let _ = write!(out, ",{c:?}");
            }
            let _ = writeln!(out, ",{:?}", s.arc_length);
        }
        out
    }
}

/// A geodesic meeting a level set of `f`.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingEvent {
    pub time: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    pub level_value: f64,
    pub arc_length: f64,
    pub orthogonality_defect: f64,
}

/// Acceleration `a` of the geodesic ODE `x'' = a(x, x')`, from
/// `g_v a = -(d^2E/dv dx . v - dE/dx)` with `E = F^2 / 2`.
pub fn spray_at(metric: &MetricSpec, x: &Vector, v: &Vector) -> Result<Vector> {
    if v.iter().all(|c| *c == 0.0) {
        return Err(FinslerError::ZeroVector);
    }
    let (g, rhs) = match metric.mode() {
        DerivativeMode::Analytic => analytic_spray_system(metric, x, v)?,
        DerivativeMode::FiniteDifference => fd_spray_system(metric, x, v)?,
    };
    solve_spd(g, &rhs)
}

fn solve_spd(g: Matrix, rhs: &Vector) -> Result<Vector> {
    let scale = g.amax();
    let chol = g.cholesky().ok_or(FinslerError::SingularTensor)?;
    let diag_min = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    if diag_min * diag_min <= 1e-14 * scale {
        return Err(FinslerError::SingularTensor);
    }
    Ok(chol.solve(rhs))
}

fn analytic_spray_system(metric: &MetricSpec, x: &Vector, v: &Vector) -> Result<(Matrix, Vector)> {
    let jet = metric.alpha_beta_jet(x)?;
    let nj = NormJet::new(&jet.value, v);
    let n = v.len();
    let (f, alpha) = (nj.f, nj.alpha);
    let mut de_dx = Vector::zeros(n);
    let mut mixed_v = Vector::zeros(n);
    for k in 0..n {
        let dav = &jet.da[k] * v;
        let q = v.dot(&dav);
        let fx = q / (2.0 * alpha) + jet.db[k].dot(v);
        let fvx = &dav / alpha - &nj.av * (q / (2.0 * alpha.powi(3))) + &jet.db[k];
        de_dx[k] = f * fx;
        mixed_v += (&nj.grad * fx + fvx * f) * v[k];
    }
    Ok((nj.fundamental_tensor(), -(mixed_v - de_dx)))
}

fn fd_spray_system(metric: &MetricSpec, x: &Vector, v: &Vector) -> Result<(Matrix, Vector)> {
    use crate::field::richardson_derivative;
    let n = v.len();
    let h = 1e-4 * (1.0 + x.norm());
    let mut de_dx = Vector::zeros(n);
    for k in 0..n {
        de_dx[k] = richardson_derivative(
            |s| {
                let mut y = x.clone();
                y[k] += s;
                metric.eval_at(&y, v).map(|f| 0.5 * f * f).unwrap_or(f64::NAN)
            },
            h,
        );
    }
    let mut mixed_v = Vector::zeros(n);
    for i in 0..n {
        mixed_v[i] = richardson_derivative(
            |s| metric.legendre_at(&(x + v * s), v).map(|l| l[i]).unwrap_or(f64::NAN),
            h / v.norm(),
        );
    }
    Ok((metric.fundamental_matrix(x, v)?, -(mixed_v - de_dx)))
}

/// Spray acceleration for a tangent vector.
pub fn spray_coefficients(metric: &MetricSpec, v: &TangentVector) -> Result<Vector> {
    spray_at(metric, &v.base.to_vector(), &v.components)
}

type Rhs<'a> = dyn Fn(&Vector, &Vector) -> Result<Vector> + 'a;

fn rk4_step(rhs: &Rhs<'_>, x: &Vector, v: &Vector, h: f64) -> Result<(Vector, Vector)> {
    let a1 = rhs(x, v)?;
    let (x2, v2) = (x + v * (h / 2.0), v + &a1 * (h / 2.0));
    let a2 = rhs(&x2, &v2)?;
    let (x3, v3) = (x + &v2 * (h / 2.0), v + &a2 * (h / 2.0));
    let a3 = rhs(&x3, &v3)?;
    let (x4, v4) = (x + &v3 * h, v + &a3 * h);
    let a4 = rhs(&x4, &v4)?;
    let xn = x + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
    let vn = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    Ok((xn, vn))
}

fn integrate_with(
    rhs: &Rhs<'_>,
    speed: &dyn Fn(&Vector, &Vector) -> Result<f64>,
    x0: &Vector,
    v0: &Vector,
    t_end: f64,
    step: f64,
    domain: &Domain,
) -> Result<GeodesicTrajectory> {
    if !(t_end > 0.0) || !(step > 0.0) {
        return Err(FinslerError::InvalidArgument("t_end and step must be positive".into()));
    }
    let n_steps = (t_end / step).ceil().max(1.0) as usize;
    let h = t_end / n_steps as f64;
    let (mut x, mut v) = (x0.clone(), v0.clone());
    let mut s_prev = speed(&x, &v)?;
    let mut arc = 0.0;
    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push(GeodesicSample { t: 0.0, point: x.as_slice().to_vec(), velocity: v.as_slice().to_vec(), arc_length: 0.0 });
    for i in 1..=n_steps {
        let (xn, vn) = rk4_step(rhs, &x, &v, h)?;
        let t = i as f64 * h;
        if !domain.contains(&xn) {
            return Err(FinslerError::LeftDomain { time: t, at: xn.as_slice().to_vec() });
        }
        let s = speed(&xn, &vn)?;
        arc += 0.5 * (s + s_prev) * h;
        s_prev = s;
        x = xn;
        v = vn;
        samples.push(GeodesicSample { t, point: x.as_slice().to_vec(), velocity: v.as_slice().to_vec(), arc_length: arc });
    }
    Ok(GeodesicTrajectory { samples })
}

/// Fixed-step classical RK4 integration of the geodesic through `v0` up to `t_end`.
pub fn integrate_geodesic(
    metric: &MetricSpec,
    v0: &TangentVector,
    t_end: f64,
    step: f64,
    domain: &Domain,
) -> Result<GeodesicTrajectory> {
    let x0 = v0.base.to_vector();
    if metric.eval_at(&x0, &v0.components)? <= 0.0 {
        return Err(FinslerError::ZeroVector);
    }
    if !domain.contains(&x0) {
        return Err(FinslerError::LeftDomain { time: 0.0, at: x0.as_slice().to_vec() });
    }
    let rhs = |x: &Vector, v: &Vector| spray_at(metric, x, v);
    let speed = |x: &Vector, v: &Vector| metric.eval_at(x, v);
    integrate_with(&rhs, &speed, &x0, &v0.components, t_end, step, domain)
}

/// `exp(v) = gamma_v(1)`; `exp(0)` is the base point.
pub fn exp_map(metric: &MetricSpec, v: &TangentVector, step: f64, domain: &Domain) -> Result<Point> {
    if v.is_zero() {
        return Ok(v.base.clone());
    }
    Ok(integrate_geodesic(metric, v, 1.0, step, domain)?.endpoint())
}

/// Basis of `ker df` (Euclidean-orthonormal), spanning the level-set tangent space.
pub fn level_tangent_basis(df: &Vector) -> Vec<Vector> {
    let n = df.len();
    let nrm = df.norm();
    if nrm == 0.0 {
        return (0..n).map(|i| Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
    }
    let normal = df / nrm;
    if n == 2 {
        return vec![Vector::from_vec(vec![-normal[1], normal[0]])];
    }
    let mut basis: Vec<Vector> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let mut e = Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
        e -= &normal * normal.dot(&e);
        for b in &basis {
            e -= b * b.dot(&e);
        }
        let en = e.norm();
        if en > 1e-8 {
            basis.push(e / en);
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

/// `max_u |g_v(v, u)| / (F(v) * max(F(u), F(-u)))`; zero iff `v` is orthogonal to span(basis).
pub fn orthogonality_defect(metric: &MetricSpec, velocity: &TangentVector, tangent_basis: &[Vector]) -> Result<f64> {
    let x = velocity.base.to_vector();
    orthogonality_defect_at(metric, &x, &velocity.components, tangent_basis)
}

pub fn orthogonality_defect_at(metric: &MetricSpec, x: &Vector, v: &Vector, tangent_basis: &[Vector]) -> Result<f64> {
    let l = metric.legendre_at(x, v)?;
    let fv = metric.eval_at(x, v)?;
    let mut worst: f64 = 0.0;
    for u in tangent_basis {
        let scale = metric.eval_at(x, u)?.max(metric.eval_at(x, &(-u))?);
        if scale == 0.0 {
            continue;
        }
        worst = worst.max(l.dot(u).abs() / (fv * scale));
    }
    Ok(worst)
}

/// State of an integration stopped at an event.
#[derive(Debug, Clone)]
pub struct EventState {
    pub time: f64,
    pub point: Vector,
    pub velocity: Vector,
    pub arc_length: f64,
}

/// Integrates until `event(x, v)` changes sign, then refines by bisection within the step.
pub fn integrate_until_event(
    metric: &MetricSpec,
    v0: &TangentVector,
    event: &dyn Fn(&Vector, &Vector) -> f64,
    options: &GeodesicOptions,
) -> Result<Option<EventState>> {
    let rhs = |x: &Vector, v: &Vector| spray_at(metric, x, v);
    let speed = |x: &Vector, v: &Vector| metric.eval_at(x, v);
    integrate_until_event_with(&rhs, &speed, v0, event, options)
}

fn integrate_until_event_with(
    rhs: &Rhs<'_>,
    speed: &dyn Fn(&Vector, &Vector) -> Result<f64>,
    v0: &TangentVector,
    event: &dyn Fn(&Vector, &Vector) -> f64,
    options: &GeodesicOptions,
) -> Result<Option<EventState>> {
    let h = options.step;
    let (mut x, mut v) = (v0.base.to_vector(), v0.components.clone());
    let e0 = event(&x, &v);
    let sign0 = e0 > 0.0;
    let mut t = 0.0;
    let mut arc = 0.0;
    let mut s_prev = speed(&x, &v)?;
    while t < options.t_max {
        let (xn, vn) = rk4_step(rhs, &x, &v, h)?;
        if !options.domain.contains(&xn) {
            return Ok(None);
        }
        let en = event(&xn, &vn);
        if en == 0.0 || (en > 0.0) != sign0 {
            let (mut lo, mut hi) = (0.0, h);
            let mut best = (xn, vn);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                let (xm, vm) = rk4_step(rhs, &x, &v, mid)?;
                let em = event(&xm, &vm);
                if em == 0.0 || (em > 0.0) != sign0 {
                    hi = mid;
                    best = (xm, vm);
                } else {
                    lo = mid;
                }
            }
            let s_end = speed(&best.0, &best.1)?;
            arc += 0.5 * (s_prev + s_end) * hi;
            return Ok(Some(EventState { time: t + hi, point: best.0, velocity: best.1, arc_length: arc }));
        }
        let s = speed(&xn, &vn)?;
        arc += 0.5 * (s + s_prev) * h;
        s_prev = s;
        x = xn;
        v = vn;
        t += h;
    }
    Ok(None)
}

/// Follows the geodesic through `v0` until `f` attains `target`.
pub fn integrate_to_level(
    metric: &MetricSpec,
    v0: &TangentVector,
    f: &ScalarField,
    target: f64,
    options: &GeodesicOptions,
) -> Result<CrossingEvent> {
    let x0 = v0.base.to_vector();
    if metric.eval_at(&x0, &v0.components)? <= 0.0 {
        return Err(FinslerError::ZeroVector);
    }
    let event = |x: &Vector, _v: &Vector| f.eval(x) - target;
    let Some(state) = integrate_until_event(metric, v0, &event, options)? else {
        return Err(FinslerError::NeverReached {
            target,
            reason: format!(
                "no crossing within t <= {} inside the chart domain (start value {})",
                options.t_max,
                f.eval(&x0)
            ),
        });
    };
    let df = f.differential(&state.point);
    let basis = level_tangent_basis(&df);
    let defect = orthogonality_defect_at(metric, &state.point, &state.velocity, &basis)?;
    Ok(CrossingEvent {
        time: state.time,
        point: state.point.as_slice().to_vec(),
        velocity: state.velocity.as_slice().to_vec(),
        level_value: f.eval(&state.point),
        arc_length: state.arc_length,
        orthogonality_defect: defect,
    })
}

/// Follows the geodesic until `f` stops increasing (`df(v)` turns negative).
pub fn integrate_to_maximum(
    metric: &MetricSpec,
    v0: &TangentVector,
    f: &ScalarField,
    options: &GeodesicOptions,
) -> Result<EventState> {
    let event = |x: &Vector, v: &Vector| f.differential(x).dot(v);
    integrate_until_event(metric, v0, &event, options)?.ok_or_else(|| FinslerError::NeverReached {
        target: f64::NAN,
        reason: "f kept increasing along the geodesic".into(),
    })
}

/// Christoffel symbols of a Riemannian metric field: `gamma[k][(i, j)] = Gamma^k_ij`.
pub fn christoffel_symbols(h: &dyn MatrixField, x: &Vector) -> Result<Vec<Matrix>> {
    let n = h.dim();
    let hinv = h.value(x).try_inverse().ok_or(FinslerError::SingularTensor)?;
    let dh = h.partials(x);
    // first kind: c[l](i, j) = 1/2 (d_i h_lj + d_j h_li - d_l h_ij)
    let first: Vec<Matrix> = (0..n)
        .map(|l| Matrix::from_fn(n, n, |i, j| 0.5 * (dh[i][(l, j)] + dh[j][(l, i)] - dh[l][(i, j)])))
        .collect();
    Ok((0..n)
        .map(|k| {
            let mut m = Matrix::zeros(n, n);
            for (l, c) in first.iter().enumerate() {
                m += c * hinv[(k, l)];
            }
            m
        })
        .collect())
}

/// `-Gamma(v, v)`.
pub fn christoffel_acceleration(h: &dyn MatrixField, x: &Vector, v: &Vector) -> Result<Vector> {
    let gamma = christoffel_symbols(h, x)?;
    Ok(Vector::from_iterator(v.len(), gamma.iter().map(|g| -v.dot(&(g * v)))))
}

/// Riemannian geodesic from Christoffel symbols, independent of the spray route.
pub fn integrate_riemannian_geodesic(
    h: &dyn MatrixField,
    v0: &TangentVector,
    t_end: f64,
    step: f64,
    domain: &Domain,
) -> Result<GeodesicTrajectory> {
    let rhs = |x: &Vector, v: &Vector| christoffel_acceleration(h, x, v);
    let speed = |x: &Vector, v: &Vector| Ok(v.dot(&(h.value(x) * v)).max(0.0).sqrt());
    integrate_with(&rhs, &speed, &v0.base.to_vector(), &v0.components, t_end, step, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{ExprMatrixField, Expression};
    use std::sync::Arc;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn round_sphere_stereo() -> ExprMatrixField {
        let c = Expression::parse("4/(1 + x^2 + y^2)^2").unwrap();
        let z = Expression::Const(0.0);
        ExprMatrixField::new(vec![vec![c.clone(), z.clone()], vec![z, c]]).unwrap()
    }

    #[test]
    fn minkowski_spray_vanishes() {
        let f = MetricSpec::minkowski_randers(v2(0.3, -0.4));
        let a = spray_coefficients(&f, &TangentVector::at(&v2(0.2, 0.1), v2(1.0, 2.0))).unwrap();
        assert!(a.amax() < 1e-15);
    }

    #[test]
    fn riemannian_spray_is_christoffel_contraction() {
        let h = round_sphere_stereo();
        let f = MetricSpec::riemannian(crate::metric::RiemannianMetric::new(Arc::new(h.clone())));
        let x = v2(0.4, -0.7);
        let v = v2(0.3, 1.2);
        let a = spray_at(&f, &x, &v).unwrap();
        let b = christoffel_acceleration(&h, &x, &v).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn straight_line_in_minkowski_space() {
        let f = MetricSpec::minkowski_randers(v2(0.5, 0.0));
        let tr = integrate_geodesic(&f, &TangentVector::at(&v2(0.0, 0.0), v2(1.0, 0.0)), 1.0, 1e-3, &Domain::Unbounded).unwrap();
        let end = tr.endpoint();
        assert!((end.coords[0] - 1.0).abs() < 1e-12 && end.coords[1].abs() < 1e-15);
        assert!((tr.arc_length() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_arc_length() {
        let f = MetricSpec::euclidean(2);
        let v = v2(0.6, 0.8);
        let tr = integrate_geodesic(&f, &TangentVector::at(&v2(0.0, 0.0), v.clone()), 3.0, 1e-3, &Domain::Unbounded).unwrap();
        assert!((tr.endpoint().to_vector() - v * 3.0).amax() < 1e-12);
        assert!((tr.arc_length() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exp_of_zero_and_straight_lines() {
        let f = MetricSpec::minkowski_randers(v2(0.5, 0.0));
        let base = v2(0.2, -0.3);
        let zero = TangentVector::at(&base, v2(0.0, 0.0));
        assert_eq!(exp_map(&f, &zero, 1e-3, &Domain::Unbounded).unwrap().to_vector(), base);
        let v = TangentVector::at(&base, v2(-0.4, 0.9));
        let p = exp_map(&f, &v, 1e-3, &Domain::Unbounded).unwrap();
        assert!((p.to_vector() - (&base + v2(-0.4, 0.9))).amax() < 1e-12);
    }

    #[test]
    fn leaving_the_domain_is_reported() {
        let f = MetricSpec::euclidean(2);
        let err = integrate_geodesic(&f, &TangentVector::at(&v2(0.0, 0.0), v2(1.0, 0.0)), 2.0, 1e-2, &Domain::Disc { radius: 1.0 });
        assert!(matches!(err, Err(FinslerError::LeftDomain { .. })));
    }

    #[test]
    fn great_circle_through_the_pole() {
        // Meridian from the equator point (1, 0) through the north pole (0, 0) to (-1, 0).
        let h = round_sphere_stereo();
        let f = MetricSpec::riemannian(crate::metric::RiemannianMetric::new(Arc::new(h)));
        let v0 = TangentVector::at(&v2(1.0, 0.0), v2(-1.0, 0.0));
        let tr = integrate_geodesic(&f, &v0, std::f64::consts::PI, 1e-3, &Domain::Disc { radius: 1.5 }).unwrap();
        let end = tr.endpoint();
        assert!((end.coords[0] + 1.0).abs() < 1e-8, "{end:?}");
        assert!((tr.arc_length() - std::f64::consts::PI).abs() < 1e-5);
    }

    #[test]
    fn tangent_basis_annihilated_by_df() {
        let df = Vector::from_vec(vec![0.3, -1.0, 2.0]);
        let b = level_tangent_basis(&df);
        assert_eq!(b.len(), 2);
        for u in &b {
            assert!(u.dot(&df).abs() < 1e-14);
        }
        assert!(b[0].dot(&b[1]).abs() < 1e-14);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let f = MetricSpec::euclidean(2);
        let tr = integrate_geodesic(&f, &TangentVector::at(&v2(0.0, 0.0), v2(1.0, 0.0)), 0.1, 0.05, &Domain::Unbounded).unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x0,x1,v0,v1,arc_length");
        assert_eq!(lines.count(), 3);
    }
}

//! Legendre transform, Finsler gradients and gradient-direction Hessians.

use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::field::{Matrix, ScalarField, Vector};
use crate::metric::{DerivativeMode, MetricSpec, Point, TangentVector};

/// Below this `|df|` a point is treated as critical.
pub const DEFAULT_CRITICAL_THRESHOLD: f64 = 1e-8;

const NEWTON_MAX_ITERATIONS: usize = 50;
const NEWTON_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Covector {
    pub base: Point,
    pub components: Vector,
}

impl Covector {
    pub fn at(base: &Vector, components: Vector) -> Self {
        Self { base: Point::from_vector(base), components }
    }

    pub fn apply(&self, v: &Vector) -> f64 {
        self.components.dot(v)
    }
}

#[derive(Debug, Clone)]
pub struct GradientResult {
    pub gradient: TangentVector,
    pub finsler_norm: f64,
    /// `h^{-1} df`, filled for metrics with Zermelo data.
    pub riemannian_gradient: Option<TangentVector>,
    pub newton_iterations: usize,
    /// Defects of the two Randers gradient identities, see [`check_randers_gradient_lemma`].
    pub lemma_defects: Option<(f64, f64)>,
}

/// `L(v) = g_v(v, .)`.
pub fn legendre(metric: &MetricSpec, v: &TangentVector) -> Result<Covector> {
    let x = v.base.to_vector();
    let components = metric.legendre_at(&x, &v.components)?;
    Ok(Covector { base: v.base.clone(), components })
}

/// Solves `L(v) = omega` by damped Newton. The Jacobian of `L` is exactly `g_v`.
pub fn legendre_inverse_at(metric: &MetricSpec, x: &Vector, omega: &Vector) -> Result<(Vector, usize)> {
    let scale = omega.norm();
    if scale == 0.0 {
        return Err(FinslerError::ZeroVector);
    }
    let h = metric.reference_metric(x);
    let mut v = h
        .clone()
        .cholesky()
        .map(|c| c.solve(omega))
        .ok_or(FinslerError::SingularTensor)?;
    let mut residual = metric.legendre_at(x, &v)? - omega;
    let mut rnorm = residual.norm();
    for it in 0..NEWTON_MAX_ITERATIONS {
        if rnorm <= NEWTON_TOLERANCE * scale {
            return Ok((v, it));
        }
        let g = metric.fundamental_matrix(x, &v)?;
        let step = g.cholesky().ok_or(FinslerError::SingularTensor)?.solve(&(-&residual));
        let mut t = 1.0;
        loop {
            let trial = &v + &step * t;
            let accepted = match metric.legendre_at(x, &trial) {
                Ok(l) => {
                    let r = l - omega;
                    let n = r.norm();
                    if n.is_finite() && (n <= (1.0 - 1e-4 * t) * rnorm || t < 1e-3 && n < rnorm) {
                        v = trial;
                        residual = r;
                        rnorm = n;
                        true
                    } else {
                        false
                    }
                }
                Err(FinslerError::ZeroVector) => false,
                Err(e) => return Err(e),
            };
            if accepted {
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                // No further decrease available; accept at the noise floor of L.
                let floor = match metric.mode() {
                    DerivativeMode::Analytic => 1e3 * f64::EPSILON,
                    DerivativeMode::FiniteDifference => 1e-9,
                };
                if rnorm <= floor * scale {
                    return Ok((v, it + 1));
                }
                return Err(FinslerError::NoConvergence { iterations: it + 1, residual: rnorm });
            }
        }
    }
    if rnorm <= NEWTON_TOLERANCE * scale {
        Ok((v, NEWTON_MAX_ITERATIONS))
    } else {
        Err(FinslerError::NoConvergence { iterations: NEWTON_MAX_ITERATIONS, residual: rnorm })
    }
}

/// `L^{-1}(omega)`.
pub fn legendre_inverse(metric: &MetricSpec, omega: &Covector) -> Result<TangentVector> {
    let x = omega.base.to_vector();
    let (v, _) = legendre_inverse_at(metric, &x, &omega.components)?;
    Ok(TangentVector { base: omega.base.clone(), components: v })
}

fn require_regular(df: &Vector, x: &Vector, threshold: f64) -> Result<()> {
    let n = df.norm();
    if !(n >= threshold) {
        return Err(FinslerError::CriticalPoint { at: x.as_slice().to_vec(), df_norm: n });
    }
    Ok(())
}

/// `grad f = L^{-1}(df)` at `x` (raw vector form).
pub fn gradient_vector(metric: &MetricSpec, f: &ScalarField, x: &Vector) -> Result<Vector> {
    let df = f.differential(x);
    require_regular(&df, x, DEFAULT_CRITICAL_THRESHOLD)?;
    Ok(legendre_inverse_at(metric, x, &df)?.0)
}

/// Finsler gradient with the Riemannian comparison data filled in.
pub fn finsler_gradient(metric: &MetricSpec, f: &ScalarField, p: &Point) -> Result<GradientResult> {
    finsler_gradient_with(metric, f, p, DEFAULT_CRITICAL_THRESHOLD)
}

pub fn finsler_gradient_with(
    metric: &MetricSpec,
    f: &ScalarField,
    p: &Point,
    critical_threshold: f64,
) -> Result<GradientResult> {
    let x = p.to_vector();
    let df = f.differential(&x);
    require_regular(&df, &x, critical_threshold)?;
    let (grad, iterations) = legendre_inverse_at(metric, &x, &df)?;
    let finsler_norm = metric.eval_at(&x, &grad)?;
    let (riemannian_gradient, lemma_defects) = match metric.zermelo_data(&x) {
        Some((h, w)) => {
            let tilde = h.clone().cholesky().ok_or(FinslerError::SingularTensor)?.solve(&df);
            let defects = randers_defects(&h, &w, &df, &grad, &tilde, finsler_norm);
            (Some(TangentVector::at(&x, tilde)), Some(defects))
        }
        None => (None, None),
    };
    Ok(GradientResult {
        gradient: TangentVector::at(&x, grad),
        finsler_norm,
        riemannian_gradient,
        newton_iterations: iterations,
        lemma_defects,
    })
}

fn randers_defects(h: &Matrix, w: &Vector, df: &Vector, grad: &Vector, tilde: &Vector, z: f64) -> (f64, f64) {
    let hnorm = |u: &Vector| u.dot(&(h * u)).max(0.0).sqrt();
    let tilde_norm = hnorm(tilde);
    let k = tilde_norm / z;
    let vector_defect = hnorm(&((grad - w * z) * k - tilde));
    let scalar_defect = (z - (tilde_norm + df.dot(w))).abs();
    (vector_defect, scalar_defect)
}

/// Defects of the Randers gradient identities at `p`:
/// `(|grad~f| / Z(grad f)) (grad f - Z(grad f) W) = grad~f` (h-norm of the difference) and
/// `Z(grad f) = |grad~f| + df(W)`.
pub fn check_randers_gradient_lemma(metric: &MetricSpec, f: &ScalarField, p: &Point) -> Result<(f64, f64)> {
    let x = p.to_vector();
    let Some((h, w)) = metric.zermelo_data(&x) else {
        return Err(FinslerError::InvalidArgument("metric has no Zermelo data".into()));
    };
    let df = f.differential(&x);
    require_regular(&df, &x, DEFAULT_CRITICAL_THRESHOLD)?;
    let (grad, _) = legendre_inverse_at(metric, &x, &df)?;
    let z = metric.eval_at(&x, &grad)?;
    let tilde = h.clone().cholesky().ok_or(FinslerError::SingularTensor)?.solve(&df);
    Ok(randers_defects(&h, &w, &df, &grad, &tilde, z))
}

/// `Hess f(grad f, grad f) = 1/2 D_{grad f}[F^2(grad f)]`, by a five-point stencil
/// along `grad f` with spatial step `1e-3 (1 + |p|)`.
pub fn hessian_along_gradient(metric: &MetricSpec, f: &ScalarField, p: &Point) -> Result<f64> {
    let x = p.to_vector();
    let grad = gradient_vector(metric, f, &x)?;
    let h = 1e-3 * (1.0 + x.norm()) / grad.norm();
    let phi = |s: f64| -> Result<f64> {
        let y = &x + &grad * s;
        let g = gradient_vector(metric, f, &y)?;
        let n = metric.eval_at(&y, &g)?;
        Ok(n * n)
    };
    let d = (-phi(2.0 * h)? + 8.0 * phi(h)? - 8.0 * phi(-h)? + phi(-2.0 * h)?) / (12.0 * h);
    Ok(0.5 * d)
}

/// Coordinate Hessian of `f` at a critical point (chart independent there).
pub fn coordinate_hessian_at_critical(f: &ScalarField, p: &Point) -> Result<Matrix> {
    let x = p.to_vector();
    let df = f.differential(&x);
    let n = df.norm();
    if n > DEFAULT_CRITICAL_THRESHOLD {
        return Err(FinslerError::NotCritical { at: p.coords.clone(), df_norm: n });
    }
    let m = f.hessian(&x);
    Ok((&m + m.transpose()) * 0.5)
}

/// Serializable summary of a gradient evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct GradientSummary {
    pub point: Vec<f64>,
    pub gradient: Vec<f64>,
    pub finsler_norm: f64,
    pub newton_iterations: usize,
}

impl From<&GradientResult> for GradientSummary {
    fn from(r: &GradientResult) -> Self {
        Self {
            point: r.gradient.base.coords.clone(),
            gradient: r.gradient.components.as_slice().to_vec(),
            finsler_norm: r.finsler_norm,
            newton_iterations: r.newton_iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{ExprFunction, ExprVectorField, Expression};
    use crate::metric::{RiemannianMetric, WindField};
    use std::sync::Arc;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn expr_field(text: &str) -> ScalarField {
        let e = Expression::parse(text).unwrap();
        ScalarField::new(text, Arc::new(ExprFunction::new(e, 2).unwrap()))
    }

    fn disc_radial() -> MetricSpec {
        let w = ExprVectorField::new(vec![Expression::Var(0), Expression::Var(1)]).unwrap();
        MetricSpec::randers(RiemannianMetric::euclidean(2), WindField::new(Arc::new(w)))
    }

    #[test]
    fn riemannian_legendre_is_matrix_product() {
        let f = MetricSpec::euclidean(2);
        let v = TangentVector::at(&v2(0.0, 0.0), v2(0.3, -0.4));
        assert_eq!(legendre(&f, &v).unwrap().components, v2(0.3, -0.4));
        let back = legendre_inverse(&f, &Covector::at(&v2(0.0, 0.0), v2(1.0, 2.0))).unwrap();
        assert!((back.components - v2(1.0, 2.0)).amax() < 1e-15);
    }

    #[test]
    fn legendre_pairing_is_f_squared() {
        let f = MetricSpec::minkowski_randers(v2(0.5, 0.2));
        let v = TangentVector::at(&v2(0.0, 0.0), v2(-0.3, 1.1));
        let l = legendre(&f, &v).unwrap();
        let z = f.eval(&v).unwrap();
        assert!((l.apply(&v.components) - z * z).abs() < 1e-14);
    }

    #[test]
    fn zero_covector_is_rejected() {
        let f = MetricSpec::minkowski_randers(v2(0.5, 0.0));
        let err = legendre_inverse(&f, &Covector::at(&v2(0.0, 0.0), v2(0.0, 0.0))).unwrap_err();
        assert_eq!(err, FinslerError::ZeroVector);
    }

    #[test]
    fn euclidean_gradient_of_paraboloid() {
        let f = MetricSpec::euclidean(2);
        let r = finsler_gradient(&f, &expr_field("x^2 + y^2"), &Point::new(vec![0.3, 0.0])).unwrap();
        assert!((r.gradient.components - v2(0.6, 0.0)).amax() < 1e-14);
        assert!((r.finsler_norm - 0.6).abs() < 1e-14);
    }

    #[test]
    fn disc_radial_gradient_norm() {
        let r = finsler_gradient(&disc_radial(), &expr_field("x^2 + y^2"), &Point::new(vec![0.3, 0.0])).unwrap();
        assert!((r.finsler_norm - 0.78).abs() < 1e-12);
        let (dv, ds) = r.lemma_defects.unwrap();
        assert!(dv < 1e-12 && ds < 1e-12);
        // 0.78 = |grad~ f| + df(W) = 0.6 + 0.18
        let tilde = r.riemannian_gradient.unwrap().components;
        assert!((tilde.norm() - 0.6).abs() < 1e-14);
    }

    #[test]
    fn critical_points_are_rejected() {
        let err = finsler_gradient(&disc_radial(), &expr_field("x^2 + y^2"), &Point::new(vec![0.0, 0.0]));
        assert!(matches!(err, Err(FinslerError::CriticalPoint { .. })));
        let err = hessian_along_gradient(&disc_radial(), &expr_field("x^2 + y^2"), &Point::new(vec![0.0, 0.0]));
        assert!(matches!(err, Err(FinslerError::CriticalPoint { .. })));
    }

    #[test]
    fn zero_wind_lemma_degenerates() {
        let f = MetricSpec::minkowski_randers(v2(0.0, 0.0));
        let (a, b) = check_randers_gradient_lemma(&f, &expr_field("x^3 + x*y"), &Point::new(vec![0.4, 0.1])).unwrap();
        assert!(a < 1e-15 && b < 1e-15);
    }

    #[test]
    fn hessian_along_gradient_disc() {
        let t: f64 = 0.09;
        let oracle = 0.5 * 2.0 * (2.0 * t.sqrt() + 2.0 * t) * (t.powf(-0.5) + 2.0) * (2.0 * t.sqrt() + 2.0 * t).powi(2);
        let v = hessian_along_gradient(&disc_radial(), &expr_field("x^2 + y^2"), &Point::new(vec![0.3, 0.0])).unwrap();
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
        assert!((v - 2.53094).abs() < 1e-3);
    }

    #[test]
    fn coordinate_hessian_requires_critical_point() {
        let f = expr_field("x^2 + y^2");
        let h = coordinate_hessian_at_critical(&f, &Point::new(vec![0.0, 0.0])).unwrap();
        assert_eq!(h, Matrix::identity(2, 2) * 2.0);
        assert_eq!(h, h.transpose());
        assert!(matches!(
            coordinate_hessian_at_critical(&f, &Point::new(vec![0.1, 0.0])),
            Err(FinslerError::NotCritical { .. })
        ));
    }
}

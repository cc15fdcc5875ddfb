//! Finsler structures on a single chart: Riemannian metrics, Randers metrics
//! given by Zermelo navigation data `(h, W)`, and reverse metrics.
//!
//! Every built-in metric is of the form `F = alpha + beta` with
//! `alpha(v) = sqrt(v^T a v)` and `beta(v) = b . v`. For Zermelo data the
//! conversion is
//!
//! ```text
//! lambda = 1 - h(W, W)
//! a_ij   = h_ij / lambda + W_i W_j / lambda^2      (W_i = h_ij W^j)
//! b_i    = -W_i / lambda
//! ```
//!
//! and the closed forms below give `F^2` derivatives of every order needed
//! (fundamental tensor, Cartan tensor, spray).

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::field::{richardson_derivative, MatrixField, Vector, VectorField, Matrix, FD_STEP};

/// Largest admissible `h(W, W)`; beyond it `g_v` conditioning degrades.
pub const WIND_LIMIT: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn from_vector(v: &Vector) -> Self {
        Self { coords: v.as_slice().to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn to_vector(&self) -> Vector {
        Vector::from_column_slice(&self.coords)
    }
}

impl From<Vector> for Point {
    fn from(v: Vector) -> Self {
        Self::from_vector(&v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub components: Vector,
}

impl TangentVector {
    pub fn new(base: Point, components: Vector) -> Result<Self> {
        if base.dim() != components.len() {
            return Err(FinslerError::DimensionMismatch {
                expected: base.dim(),
                got: components.len(),
            });
        }
        Ok(Self { base, components })
    }

    pub fn at(base: &Vector, components: Vector) -> Self {
        Self { base: Point::from_vector(base), components }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| *c == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { base: self.base.clone(), components: &self.components * s }
    }
}

/// Riemannian metric `h` given as a field of symmetric positive-definite matrices.
#[derive(Clone)]
pub struct RiemannianMetric {
    field: Arc<dyn MatrixField>,
}

impl RiemannianMetric {
    pub fn new(field: Arc<dyn MatrixField>) -> Self {
        Self { field }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(Arc::new(crate::field::ConstantMatrix(Matrix::identity(dim, dim))))
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn matrix(&self, x: &Vector) -> Matrix {
        self.field.value(x)
    }

    pub fn partials(&self, x: &Vector) -> Vec<Matrix> {
        self.field.partials(x)
    }

    pub fn field(&self) -> &Arc<dyn MatrixField> {
        &self.field
    }
}

/// Wind vector field `W` of Zermelo navigation data.
#[derive(Clone)]
pub struct WindField {
    field: Arc<dyn VectorField>,
}

impl WindField {
    pub fn new(field: Arc<dyn VectorField>) -> Self {
        Self { field }
    }

    pub fn constant(w: Vector) -> Self {
        Self::new(Arc::new(crate::field::ConstantVector(w)))
    }

    pub fn value(&self, x: &Vector) -> Vector {
        self.field.value(x)
    }

    pub fn partials(&self, x: &Vector) -> Vec<Vector> {
        self.field.partials(x)
    }

    fn negated(&self) -> Self {
        let inner = self.field.clone();
        Self::new(Arc::new(NegatedWind(inner)))
    }
}

struct NegatedWind(Arc<dyn VectorField>);

impl VectorField for NegatedWind {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Vector) -> Vector {
        -self.0.value(x)
    }
    fn partials(&self, x: &Vector) -> Vec<Vector> {
        self.0.partials(x).into_iter().map(|p| -p).collect()
    }
}

/// How tensors are obtained from `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// Closed forms from the alpha + beta representation.
    Analytic,
    /// Richardson-extrapolated central differences of `F^2`.
    FiniteDifference,
}

#[derive(Clone)]
pub enum MetricKind {
    Riemannian(RiemannianMetric),
    Randers { h: RiemannianMetric, wind: WindField },
    Reverse(Box<MetricSpec>),
}

#[derive(Clone)]
pub struct MetricSpec {
    kind: MetricKind,
    dim: usize,
    mode: DerivativeMode,
}

impl fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            MetricKind::Riemannian(_) => "riemannian".to_string(),
            MetricKind::Randers { .. } => "randers".to_string(),
            MetricKind::Reverse(inner) => format!("reverse({inner:?})"),
        };
        write!(f, "MetricSpec({kind}, dim={}, {:?})", self.dim, self.mode)
    }
}

/// `a` and `b` of `F = sqrt(v^T a v) + b . v` at one point.
#[derive(Debug, Clone)]
pub struct AlphaBeta {
    pub a: Matrix,
    pub b: Vector,
}

/// `AlphaBeta` together with its coordinate partials.
#[derive(Debug, Clone)]
pub struct AlphaBetaJet {
    pub value: AlphaBeta,
    pub da: Vec<Matrix>,
    pub db: Vec<Vector>,
}

/// Derivatives of `F = alpha + beta` with respect to the direction `v`.
#[derive(Debug, Clone)]
pub(crate) struct NormJet {
    pub f: f64,
    pub alpha: f64,
    /// `dF/dv`
    pub grad: Vector,
    /// `d^2F/dv^2`
    pub hess: Matrix,
    /// `a v`
    pub av: Vector,
}

impl NormJet {
    pub fn new(ab: &AlphaBeta, v: &Vector) -> Self {
        let av = &ab.a * v;
        let alpha = v.dot(&av).max(0.0).sqrt();
        let f = alpha + ab.b.dot(v);
        let dalpha = &av / alpha;
        let grad = &dalpha + &ab.b;
        let hess = (&ab.a - &dalpha * dalpha.transpose()) / alpha;
        Self { f, alpha, grad, hess, av }
    }

    pub fn fundamental_tensor(&self) -> Matrix {
        let g = &self.grad * self.grad.transpose() + &self.hess * self.f;
        (&g + g.transpose()) * 0.5
    }

    pub fn cartan(&self, w1: &Vector, w2: &Vector, w3: &Vector) -> f64 {
        let l = |w: &Vector| self.grad.dot(w);
        let h = |u: &Vector, w: &Vector| u.dot(&(&self.hess * w));
        let da = |w: &Vector| self.av.dot(w) / self.alpha;
        let third = -(h(w1, w3) * da(w2) + h(w2, w3) * da(w1) + h(w1, w2) * da(w3)) / self.alpha;
        0.5 * (l(w1) * h(w2, w3) + l(w2) * h(w1, w3) + l(w3) * h(w1, w2)) + 0.5 * self.f * third
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalTensorValue {
    pub at: TangentVector,
    pub matrix: Matrix,
}

impl FundamentalTensorValue {
    pub fn pair(&self, u: &Vector, w: &Vector) -> f64 {
        u.dot(&(&self.matrix * w))
    }
}

impl MetricSpec {
    pub fn riemannian(h: RiemannianMetric) -> Self {
        let dim = h.dim();
        Self { kind: MetricKind::Riemannian(h), dim, mode: DerivativeMode::Analytic }
    }

    pub fn randers(h: RiemannianMetric, wind: WindField) -> Self {
        let dim = h.dim();
        Self { kind: MetricKind::Randers { h, wind }, dim, mode: DerivativeMode::Analytic }
    }

    /// Euclidean metric of dimension `dim`.
    pub fn euclidean(dim: usize) -> Self {
        Self::riemannian(RiemannianMetric::euclidean(dim))
    }

    /// Randers metric with Euclidean `h` and a constant wind: a Minkowski space.
    pub fn minkowski_randers(wind: Vector) -> Self {
        let dim = wind.len();
        Self::randers(RiemannianMetric::euclidean(dim), WindField::constant(wind))
    }

    /// Wraps `inner` as `F^-(v) = F(-v)` without simplifying.
    pub fn reverse_of(inner: MetricSpec) -> Self {
        let dim = inner.dim;
        let mode = inner.mode;
        Self { kind: MetricKind::Reverse(Box::new(inner)), dim, mode }
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        if let MetricKind::Reverse(inner) = &mut self.kind {
            inner.mode = mode;
        }
        self
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn is_reversible(&self) -> bool {
        match &self.kind {
            MetricKind::Riemannian(_) => true,
            MetricKind::Randers { .. } => false,
            MetricKind::Reverse(inner) => inner.is_reversible(),
        }
    }

    /// Zermelo data `(h, W)` at `x`, if this is a Randers metric (or the reverse of one).
    pub fn zermelo_data(&self, x: &Vector) -> Option<(Matrix, Vector)> {
        match &self.kind {
            MetricKind::Riemannian(h) => Some((h.matrix(x), Vector::zeros(self.dim))),
            MetricKind::Randers { h, wind } => Some((h.matrix(x), wind.value(x))),
            MetricKind::Reverse(inner) => inner.zermelo_data(x).map(|(h, w)| (h, -w)),
        }
    }

    /// Riemannian part `h`, used to seed Legendre inversion and for the Riemannian gradient.
    pub fn reference_metric(&self, x: &Vector) -> Matrix {
        match &self.kind {
            MetricKind::Riemannian(h) | MetricKind::Randers { h, .. } => h.matrix(x),
            MetricKind::Reverse(inner) => inner.reference_metric(x),
        }
    }

    fn check_dims(&self, x: &Vector, v: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(FinslerError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if v.len() != self.dim {
            return Err(FinslerError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(())
    }

    fn checked_h(h: &RiemannianMetric, x: &Vector) -> Result<Matrix> {
        let m = h.matrix(x);
        if m.iter().any(|c| !c.is_finite()) || m.clone().cholesky().is_none() {
            return Err(FinslerError::Validation(format!(
                "h is not positive definite at {:?}",
                x.as_slice()
            )));
        }
        Ok(m)
    }

    fn wind_lambda(h: &Matrix, w: &Vector, x: &Vector) -> Result<f64> {
        let norm_sq = w.dot(&(h * w));
        if !(norm_sq <= WIND_LIMIT) {
            return Err(FinslerError::NonConvexWind {
                norm_sq,
                limit: WIND_LIMIT,
                at: x.as_slice().to_vec(),
            });
        }
        Ok(1.0 - norm_sq)
    }

    /// `F(v)` at base point `x`.
    pub fn eval_at(&self, x: &Vector, v: &Vector) -> Result<f64> {
        self.check_dims(x, v)?;
        match &self.kind {
            MetricKind::Riemannian(h) => {
                let m = Self::checked_h(h, x)?;
                Ok(v.dot(&(&m * v)).max(0.0).sqrt())
            }
            MetricKind::Randers { h, wind } => {
                let m = Self::checked_h(h, x)?;
                let w = wind.value(x);
                let lambda = Self::wind_lambda(&m, &w, x)?;
                let hv = &m * v;
                let wv = w.dot(&hv);
                let vv = v.dot(&hv);
                // Positive root of h(v/Z - W, v/Z - W) = 1.
                Ok(((lambda * vv + wv * wv).max(0.0).sqrt() - wv) / lambda)
            }
            MetricKind::Reverse(inner) => inner.eval_at(x, &(-v)),
        }
    }

    pub fn eval(&self, v: &TangentVector) -> Result<f64> {
        self.eval_at(&v.base.to_vector(), &v.components)
    }

    /// `a`, `b` of the alpha + beta form at `x`.
    pub fn alpha_beta(&self, x: &Vector) -> Result<AlphaBeta> {
        match &self.kind {
            MetricKind::Riemannian(h) => {
                Ok(AlphaBeta { a: Self::checked_h(h, x)?, b: Vector::zeros(self.dim) })
            }
            MetricKind::Randers { h, wind } => {
                let m = Self::checked_h(h, x)?;
                let w = wind.value(x);
                let lambda = Self::wind_lambda(&m, &w, x)?;
                let low = &m * &w;
                let a = &m / lambda + &low * low.transpose() / (lambda * lambda);
                let b = -&low / lambda;
                Ok(AlphaBeta { a, b })
            }
            MetricKind::Reverse(inner) => {
                let ab = inner.alpha_beta(x)?;
                Ok(AlphaBeta { a: ab.a, b: -ab.b })
            }
        }
    }

    /// `alpha_beta` with its partial derivatives along each coordinate.
    pub fn alpha_beta_jet(&self, x: &Vector) -> Result<AlphaBetaJet> {
        match &self.kind {
            MetricKind::Riemannian(h) => {
                let value = self.alpha_beta(x)?;
                let da = h.partials(x);
                let db = vec![Vector::zeros(self.dim); self.dim];
                Ok(AlphaBetaJet { value, da, db })
            }
            MetricKind::Randers { h, wind } => {
                let m = Self::checked_h(h, x)?;
                let w = wind.value(x);
                let lambda = Self::wind_lambda(&m, &w, x)?;
                let dh = h.partials(x);
                let dw = wind.partials(x);
                let low = &m * &w;
                let a = &m / lambda + &low * low.transpose() / (lambda * lambda);
                let b = -&low / lambda;
                let mut da = Vec::with_capacity(self.dim);
                let mut db = Vec::with_capacity(self.dim);
                for k in 0..self.dim {
                    let dlow = &dh[k] * &w + &m * &dw[k];
                    let dlambda = -(dw[k].dot(&low) + w.dot(&dlow));
                    let l2 = lambda * lambda;
                    let outer = &dlow * low.transpose() + &low * dlow.transpose();
                    da.push(
                        &dh[k] / lambda - &m * (dlambda / l2) + outer / l2
                            - &low * low.transpose() * (2.0 * dlambda / (l2 * lambda)),
                    );
                    db.push(-&dlow / lambda + &low * (dlambda / l2));
                }
                Ok(AlphaBetaJet { value: AlphaBeta { a, b }, da, db })
            }
            MetricKind::Reverse(inner) => {
                let jet = inner.alpha_beta_jet(x)?;
                Ok(AlphaBetaJet {
                    value: AlphaBeta { a: jet.value.a, b: -jet.value.b },
                    da: jet.da,
                    db: jet.db.into_iter().map(|d| -d).collect(),
                })
            }
        }
    }

    pub(crate) fn norm_jet(&self, x: &Vector, v: &Vector) -> Result<NormJet> {
        self.check_dims(x, v)?;
        if v.iter().all(|c| *c == 0.0) {
            return Err(FinslerError::ZeroVector);
        }
        let ab = self.alpha_beta(x)?;
        Ok(NormJet::new(&ab, v))
    }

    /// `g_v` as a matrix.
    pub fn fundamental_matrix(&self, x: &Vector, v: &Vector) -> Result<Matrix> {
        match self.mode {
            DerivativeMode::Analytic => Ok(self.norm_jet(x, v)?.fundamental_tensor()),
            DerivativeMode::FiniteDifference => {
                self.check_dims(x, v)?;
                if v.iter().all(|c| *c == 0.0) {
                    return Err(FinslerError::ZeroVector);
                }
                self.fd_fundamental(x, v)
            }
        }
    }

    /// `L(v) = g_v(v, .)`.
    pub fn legendre_at(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        match self.mode {
            DerivativeMode::Analytic => {
                let jet = self.norm_jet(x, v)?;
                Ok(&jet.grad * jet.f)
            }
            DerivativeMode::FiniteDifference => {
                self.check_dims(x, v)?;
                if v.iter().all(|c| *c == 0.0) {
                    return Err(FinslerError::ZeroVector);
                }
                let h = FD_STEP * v.norm();
                let mut out = Vector::zeros(self.dim);
                for i in 0..self.dim {
                    out[i] = 0.5
                        * richardson_derivative(
                            |s| {
                                let mut w = v.clone();
                                w[i] += s;
                                self.eval_at(x, &w).map(|f| f * f).unwrap_or(f64::NAN)
                            },
                            h,
                        );
                }
                Ok(out)
            }
        }
    }

    fn fd_fundamental(&self, x: &Vector, v: &Vector) -> Result<Matrix> {
        let n = self.dim;
        // Validates the wind before differencing.
        self.eval_at(x, v)?;
        let f2 = |w: &Vector| self.eval_at(x, w).map(|f| f * f).unwrap_or(f64::NAN);
        let step = FD_STEP * v.norm();
        let mixed = |i: usize, j: usize, h: f64| {
            let mut pp = v.clone();
            pp[i] += h;
            pp[j] += h;
            let mut pm = v.clone();
            pm[i] += h;
            pm[j] -= h;
            let mut mp = v.clone();
            mp[i] -= h;
            mp[j] += h;
            let mut mm = v.clone();
            mm[i] -= h;
            mm[j] -= h;
            (f2(&pp) - f2(&pm) - f2(&mp) + f2(&mm)) / (4.0 * h * h)
        };
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let d = (4.0 * mixed(i, j, step / 2.0) - mixed(i, j, step)) / 3.0;
                g[(i, j)] = 0.5 * d;
                g[(j, i)] = 0.5 * d;
            }
        }
        Ok(g)
    }
}

/// `F(v)`.
pub fn eval_metric(metric: &MetricSpec, v: &TangentVector) -> Result<f64> {
    metric.eval(v)
}

/// `g_v(u, w) = 1/2 d^2/dt ds F^2(v + t u + s w)` at `t = s = 0`.
pub fn fundamental_tensor(metric: &MetricSpec, v: &TangentVector) -> Result<FundamentalTensorValue> {
    let matrix = metric.fundamental_matrix(&v.base.to_vector(), &v.components)?;
    Ok(FundamentalTensorValue { at: v.clone(), matrix })
}

/// `C_v(w1, w2, w3) = 1/4 d^3/ds3 ds2 ds1 F^2(v + sum s_i w_i)` at zero.
pub fn cartan_tensor(
    metric: &MetricSpec,
    v: &TangentVector,
    w1: &Vector,
    w2: &Vector,
    w3: &Vector,
) -> Result<f64> {
    let x = v.base.to_vector();
    match metric.mode() {
        DerivativeMode::Analytic => Ok(metric.norm_jet(&x, &v.components)?.cartan(w1, w2, w3)),
        DerivativeMode::FiniteDifference => {
            let h = FD_STEP * v.components.norm();
            let d = richardson_derivative(
                |s| {
                    metric
                        .fundamental_matrix(&x, &(&v.components + w3 * s))
                        .map(|g| w1.dot(&(g * w2)))
                        .unwrap_or(f64::NAN)
                },
                h,
            );
            Ok(0.5 * d)
        }
    }
}

/// `F^-(v) = F(-v)`. Riemannian metrics are their own reverse; Randers `(h, W)`
/// reverses to `(h, -W)`; reversing a reverse returns the original.
pub fn reverse_metric(metric: &MetricSpec) -> MetricSpec {
    match &metric.kind {
        MetricKind::Riemannian(_) => metric.clone(),
        MetricKind::Randers { h, wind } => {
            MetricSpec::randers(h.clone(), wind.negated()).with_mode(metric.mode)
        }
        MetricKind::Reverse(inner) => (**inner).clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn randers_half() -> MetricSpec {
        MetricSpec::minkowski_randers(v2(0.5, 0.0))
    }

    #[test]
    fn tailwind_and_headwind() {
        let f = randers_half();
        let o = v2(0.3, -0.2);
        assert_relative_eq!(f.eval_at(&o, &v2(1.0, 0.0)).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(f.eval_at(&o, &v2(-1.0, 0.0)).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_wind_is_euclidean() {
        let f = MetricSpec::minkowski_randers(v2(0.0, 0.0));
        let v = v2(3.0, -4.0);
        assert_relative_eq!(f.eval_at(&v2(0.0, 0.0), &v).unwrap(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn zermelo_equation_holds() {
        let f = randers_half();
        for v in [v2(1.0, 0.3), v2(-0.2, 1.7), v2(0.0, -2.0)] {
            let z = f.eval_at(&v2(0.0, 0.0), &v).unwrap();
            let d = &v / z - v2(0.5, 0.0);
            assert!((d.dot(&d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_beta_agrees_with_zermelo_root() {
        let f = randers_half();
        let ab = f.alpha_beta(&v2(0.0, 0.0)).unwrap();
        for v in [v2(1.0, 0.0), v2(-1.0, 0.0), v2(0.3, 0.9)] {
            let ab_value = v.dot(&(&ab.a * &v)).sqrt() + ab.b.dot(&v);
            assert_relative_eq!(ab_value, f.eval_at(&v2(0.0, 0.0), &v).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn strong_wind_is_rejected() {
        let f = MetricSpec::minkowski_randers(v2(1.0, 0.0));
        let err = f.eval_at(&v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, FinslerError::NonConvexWind { .. }));
    }

    #[test]
    fn dimension_mismatch() {
        let f = randers_half();
        let err = f.eval_at(&v2(0.0, 0.0), &Vector::from_vec(vec![1.0])).unwrap_err();
        assert!(matches!(err, FinslerError::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn zero_vector_tensors() {
        let f = randers_half();
        let v = TangentVector::at(&v2(0.0, 0.0), v2(0.0, 0.0));
        assert_eq!(f.eval(&v).unwrap(), 0.0);
        assert!(matches!(fundamental_tensor(&f, &v), Err(FinslerError::ZeroVector)));
        let w = v2(1.0, 0.0);
        assert!(matches!(cartan_tensor(&f, &v, &w, &w, &w), Err(FinslerError::ZeroVector)));
    }

    #[test]
    fn riemannian_tensor_is_h() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let f = MetricSpec::riemannian(RiemannianMetric::new(Arc::new(crate::field::ConstantMatrix(h.clone()))));
        let v = TangentVector::at(&v2(0.0, 0.0), v2(0.4, -1.1));
        let g = fundamental_tensor(&f, &v).unwrap();
        assert!((g.matrix - h).amax() < 1e-14);
        let w = v2(0.2, 0.7);
        assert!(cartan_tensor(&f, &v, &w, &v2(1.0, 0.0), &w).unwrap().abs() < 1e-14);
    }

    #[test]
    fn reverse_is_an_involution_and_flips_wind() {
        let f = randers_half();
        let r = reverse_metric(&f);
        let o = v2(0.0, 0.0);
        assert_relative_eq!(r.eval_at(&o, &v2(1.0, 0.0)).unwrap(), 2.0, epsilon = 1e-15);
        let wrapped = MetricSpec::reverse_of(f.clone());
        assert_relative_eq!(wrapped.eval_at(&o, &v2(1.0, 0.0)).unwrap(), 2.0, epsilon = 1e-15);
        let back = reverse_metric(&wrapped);
        assert_relative_eq!(back.eval_at(&o, &v2(1.0, 0.0)).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        let rr = reverse_metric(&r);
        assert_relative_eq!(rr.eval_at(&o, &v2(0.3, 0.8)).unwrap(), f.eval_at(&o, &v2(0.3, 0.8)).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn finite_difference_mode_tracks_analytic() {
        let f = randers_half();
        let fd = f.clone().with_mode(DerivativeMode::FiniteDifference);
        let x = v2(0.0, 0.0);
        let v = v2(0.7, -0.4);
        let ga = f.fundamental_matrix(&x, &v).unwrap();
        let gf = fd.fundamental_matrix(&x, &v).unwrap();
        assert!((ga - gf).amax() < 1e-6);
        let la = f.legendre_at(&x, &v).unwrap();
        let lf = fd.legendre_at(&x, &v).unwrap();
        assert!((la - lf).amax() < 1e-8);
    }
}

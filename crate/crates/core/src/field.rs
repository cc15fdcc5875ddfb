//! Smooth scalar, vector and matrix fields on a coordinate chart.
//!
//! Fields built from [`Expression`](crate::expr::Expression)s carry exact
//! symbolic derivatives. Closure-backed fields fall back to Richardson
//! extrapolated central differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Base step for the finite-difference fallbacks.
pub const FD_STEP: f64 = 1e-4;

/// Richardson-extrapolated central difference of a scalar function of one variable.
pub fn richardson_derivative<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Central-difference gradient with one Richardson step per coordinate.
pub fn fd_gradient<F: Fn(&Vector) -> f64>(f: F, x: &Vector, h: f64) -> Vector {
    let n = x.len();
    Vector::from_iterator(
        n,
        (0..n).map(|k| {
            richardson_derivative(
                |s| {
                    let mut y = x.clone();
                    y[k] += s;
                    f(&y)
                },
                h,
            )
        }),
    )
}

/// Second derivatives by differencing a gradient oracle; symmetrized.
pub fn fd_hessian_from_gradient<G: Fn(&Vector) -> Vector>(g: G, x: &Vector, h: f64) -> Matrix {
    let n = x.len();
    let mut m = Matrix::zeros(n, n);
    for k in 0..n {
        let col = fd_partial_vec(|y| g(y), x, k, h);
        m.set_column(k, &col);
    }
    (&m + m.transpose()) * 0.5
}

fn fd_partial_vec<G: Fn(&Vector) -> Vector>(g: G, x: &Vector, k: usize, h: f64) -> Vector {
    let d = |h: f64| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[k] += h;
        m[k] -= h;
        (g(&p) - g(&m)) / (2.0 * h)
    };
    (d(h / 2.0) * 4.0 - d(h)) / 3.0
}

fn fd_partial_mat<G: Fn(&Vector) -> Matrix>(g: G, x: &Vector, k: usize, h: f64) -> Matrix {
    let d = |h: f64| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[k] += h;
        m[k] -= h;
        (g(&p) - g(&m)) / (2.0 * h)
    };
    (d(h / 2.0) * 4.0 - d(h)) / 3.0
}

pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, x: &Vector) -> Vector {
        fd_gradient(|y| self.value(y), x, FD_STEP)
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        fd_hessian_from_gradient(|y| self.gradient(y), x, FD_STEP)
    }

    /// Printable definition, when the function has one.
    fn describe(&self) -> String {
        "<opaque>".to_string()
    }
}

pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> Vector;

    /// `partials[k]` is the derivative of the field along coordinate `k`.
    fn partials(&self, x: &Vector) -> Vec<Vector> {
        (0..self.dim())
            .map(|k| fd_partial_vec(|y| self.value(y), x, k, FD_STEP))
            .collect()
    }
}

pub trait MatrixField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> Matrix;

    fn partials(&self, x: &Vector) -> Vec<Matrix> {
        (0..self.dim())
            .map(|k| fd_partial_mat(|y| self.value(y), x, k, FD_STEP))
            .collect()
    }
}

/// Closure-backed scalar function; derivatives by finite differences.
pub struct FnFunction<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&Vector) -> f64 + Send + Sync> FnFunction<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&Vector) -> f64 + Send + Sync> SmoothFunction for FnFunction<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> f64 {
        (self.f)(x)
    }
}

/// Closure-backed vector field.
pub struct FnVectorField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&Vector) -> Vector + Send + Sync> FnVectorField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&Vector) -> Vector + Send + Sync> VectorField for FnVectorField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> Vector {
        (self.f)(x)
    }
}

/// Closure-backed matrix field.
pub struct FnMatrixField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&Vector) -> Matrix + Send + Sync> FnMatrixField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&Vector) -> Matrix + Send + Sync> MatrixField for FnMatrixField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> Matrix {
        (self.f)(x)
    }
}

#[derive(Debug, Clone)]
pub struct ConstantMatrix(pub Matrix);

impl MatrixField for ConstantMatrix {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn value(&self, _x: &Vector) -> Matrix {
        self.0.clone()
    }
    fn partials(&self, _x: &Vector) -> Vec<Matrix> {
        let n = self.dim();
        vec![Matrix::zeros(n, n); n]
    }
}

#[derive(Debug, Clone)]
pub struct ConstantVector(pub Vector);

impl VectorField for ConstantVector {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn value(&self, _x: &Vector) -> Vector {
        self.0.clone()
    }
    fn partials(&self, _x: &Vector) -> Vec<Vector> {
        let n = self.dim();
        vec![Vector::zeros(n); n]
    }
}

/// A named smooth function `f: M -> R` together with its derivative oracles.
#[derive(Clone)]
pub struct ScalarField {
    pub name: String,
    func: Arc<dyn SmoothFunction>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("definition", &self.func.describe())
            .finish()
    }
}

impl ScalarField {
    pub fn new(name: impl Into<String>, func: Arc<dyn SmoothFunction>) -> Self {
        Self { name: name.into(), func }
    }

    pub fn from_fn<F>(name: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, Arc::new(FnFunction::new(dim, f)))
    }

    /// Same values, but derivatives taken by finite differences of `eval`.
    pub fn finite_difference(&self) -> Self {
        let inner = self.func.clone();
        let dim = inner.dim();
        Self::from_fn(format!("{}[fd]", self.name), dim, move |x| inner.value(x))
    }

    pub fn dim(&self) -> usize {
        self.func.dim()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.func.value(x)
    }

    /// Components of `df` at `x`.
    pub fn differential(&self, x: &Vector) -> Vector {
        self.func.gradient(x)
    }

    pub fn hessian(&self, x: &Vector) -> Matrix {
        self.func.hessian(x)
    }

    pub fn describe(&self) -> String {
        self.func.describe()
    }
}

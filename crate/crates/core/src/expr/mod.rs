//! A small infix expression language over the chart variables `x`, `y`, `z`.
//!
//! Precedence, tightest first: `^` (right associative), unary `-`, `* /`,
//! `+ -`. So `-x^2` is `-(x^2)` and `2^-x` is `2^(-x)`.

mod diff;
mod parse;

use std::fmt;

use crate::error::{FinslerError, Result};
use crate::field::{Matrix, MatrixField, SmoothFunction, Vector, VectorField};

pub use parse::{parse_expression, parse_expression_list, ListValue};
pub(crate) use parse::{parse_expression_at, parse_list_at};

pub const VARIABLES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sqrt => v.sqrt(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Const(f64),
    Var(usize),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

// Binding strength used by the printer.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expression {
    pub fn parse(text: &str) -> Result<Self> {
        parse_expression(text)
    }

    pub fn constant(c: f64) -> Self {
        Expression::Const(c)
    }

    /// Largest variable index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expression::Const(_) => 0,
            Expression::Var(i) => i + 1,
            Expression::Neg(a) | Expression::Call(_, a) => a.arity(),
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b)
            | Expression::Pow(a, b) => a.arity().max(b.arity()),
        }
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expression::Const(c) => *c,
            Expression::Var(i) => vars.get(*i).copied().unwrap_or(f64::NAN),
            Expression::Neg(a) => -a.eval(vars),
            Expression::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expression::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expression::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expression::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expression::Pow(a, b) => {
                let base = a.eval(vars);
                match **b {
                    Expression::Const(e) if e == e.trunc() && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(vars)),
                }
            }
            Expression::Call(f, a) => f.apply(a.eval(vars)),
        }
    }

    /// Evaluation that reports non-finite results as [`FinslerError::Eval`].
    pub fn try_eval(&self, vars: &[f64]) -> Result<f64> {
        let v = self.eval(vars);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FinslerError::Eval(format!("{self} is not finite at {vars:?}")))
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> Expression {
        diff::derivative(self, var)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => PREC_UNARY,
            Expression::Const(_) | Expression::Var(_) | Expression::Call(..) => PREC_ATOM,
            Expression::Neg(_) => PREC_UNARY,
            Expression::Add(..) | Expression::Sub(..) => PREC_ADD,
            Expression::Mul(..) | Expression::Div(..) => PREC_MUL,
            Expression::Pow(..) => PREC_POW,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expression, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Const(c) => write!(f, "{c}"),
            Expression::Var(i) => match VARIABLES.get(*i) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "v{i}"),
            },
            Expression::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, a.precedence() < PREC_UNARY)
            }
            Expression::Add(a, b) | Expression::Sub(a, b) => {
                let op = if matches!(self, Expression::Add(..)) { " + " } else { " - " };
                write_operand(f, a, a.precedence() < PREC_ADD)?;
                write!(f, "{op}")?;
                write_operand(f, b, b.precedence() <= PREC_ADD)
            }
            Expression::Mul(a, b) | Expression::Div(a, b) => {
                let op = if matches!(self, Expression::Mul(..)) { "*" } else { "/" };
                write_operand(f, a, a.precedence() < PREC_MUL)?;
                write!(f, "{op}")?;
                write_operand(f, b, b.precedence() <= PREC_MUL)
            }
            Expression::Pow(a, b) => {
                write_operand(f, a, a.precedence() < PREC_ATOM)?;
                write!(f, "^")?;
                write_operand(f, b, b.precedence() < PREC_UNARY)
            }
            Expression::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Scalar function defined by an expression, with symbolic gradient and Hessian.
#[derive(Debug, Clone)]
pub struct ExprFunction {
    dim: usize,
    expr: Expression,
    gradient: Vec<Expression>,
    hessian: Vec<Vec<Expression>>,
}

impl ExprFunction {
    pub fn new(expr: Expression, dim: usize) -> Result<Self> {
        if expr.arity() > dim {
            return Err(FinslerError::Validation(format!(
                "expression {expr} uses variables beyond dimension {dim}"
            )));
        }
        let gradient: Vec<_> = (0..dim).map(|k| expr.derivative(k)).collect();
        let hessian = gradient
            .iter()
            .map(|g| (0..dim).map(|k| g.derivative(k)).collect())
            .collect();
        Ok(Self { dim, expr, gradient, hessian })
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn gradient_expressions(&self) -> &[Expression] {
        &self.gradient
    }
}

impl SmoothFunction for ExprFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> f64 {
        self.expr.eval(x.as_slice())
    }
    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.dim, self.gradient.iter().map(|e| e.eval(x.as_slice())))
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        let n = self.dim;
        let m = Matrix::from_fn(n, n, |i, j| self.hessian[i][j].eval(x.as_slice()));
        (&m + m.transpose()) * 0.5
    }
    fn describe(&self) -> String {
        self.expr.to_string()
    }
}

/// Vector field with expression components.
#[derive(Debug, Clone)]
pub struct ExprVectorField {
    components: Vec<Expression>,
    partials: Vec<Vec<Expression>>,
}

impl ExprVectorField {
    pub fn new(components: Vec<Expression>) -> Result<Self> {
        let n = components.len();
        if let Some(e) = components.iter().find(|e| e.arity() > n) {
            return Err(FinslerError::Validation(format!(
                "vector component {e} uses variables beyond dimension {n}"
            )));
        }
        let partials = (0..n)
            .map(|k| components.iter().map(|e| e.derivative(k)).collect())
            .collect();
        Ok(Self { components, partials })
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }
}

impl VectorField for ExprVectorField {
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn value(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.dim(), self.components.iter().map(|e| e.eval(x.as_slice())))
    }
    fn partials(&self, x: &Vector) -> Vec<Vector> {
        self.partials
            .iter()
            .map(|col| Vector::from_iterator(col.len(), col.iter().map(|e| e.eval(x.as_slice()))))
            .collect()
    }
}

/// Symmetric matrix field with expression entries; only the upper triangle is read.
#[derive(Debug, Clone)]
pub struct ExprMatrixField {
    entries: Vec<Vec<Expression>>,
    partials: Vec<Vec<Vec<Expression>>>,
}

impl ExprMatrixField {
    pub fn new(entries: Vec<Vec<Expression>>) -> Result<Self> {
        let n = entries.len();
        if entries.iter().any(|row| row.len() != n) {
            return Err(FinslerError::Validation("metric matrix must be square".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i][j] != entries[j][i] {
                    return Err(FinslerError::Validation(format!(
                        "metric matrix is not symmetric at ({i},{j}): {} vs {}",
                        entries[i][j], entries[j][i]
                    )));
                }
            }
        }
        if let Some(e) = entries.iter().flatten().find(|e| e.arity() > n) {
            return Err(FinslerError::Validation(format!(
                "metric entry {e} uses variables beyond dimension {n}"
            )));
        }
        let partials = (0..n)
            .map(|k| {
                entries
                    .iter()
                    .map(|row| row.iter().map(|e| e.derivative(k)).collect())
                    .collect()
            })
            .collect();
        Ok(Self { entries, partials })
    }

    pub fn entries(&self) -> &[Vec<Expression>] {
        &self.entries
    }

    fn build(table: &[Vec<Expression>], x: &Vector) -> Matrix {
        let n = table.len();
        Matrix::from_fn(n, n, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            table[a][b].eval(x.as_slice())
        })
    }
}

impl MatrixField for ExprMatrixField {
    fn dim(&self) -> usize {
        self.entries.len()
    }
    fn value(&self, x: &Vector) -> Matrix {
        Self::build(&self.entries, x)
    }
    fn partials(&self, x: &Vector) -> Vec<Matrix> {
        self.partials.iter().map(|t| Self::build(t, x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(text: &str) -> Expression {
        let e = Expression::parse(text).unwrap();
        let printed = e.to_string();
        let again = Expression::parse(&printed).unwrap();
        assert_eq!(e, again, "{text} -> {printed}");
        assert_eq!(printed, again.to_string());
        e
    }

    #[test]
    fn precedence_of_unary_minus_and_power() {
        let e = roundtrip("-x^2");
        assert_eq!(e.eval(&[3.0]), -9.0);
        let e = roundtrip("2^-x");
        assert_eq!(e.eval(&[1.0]), 0.5);
        let e = roundtrip("2^3^2");
        assert_eq!(e.eval(&[]), 512.0);
        let e = roundtrip("(-2)^2");
        assert_eq!(e.eval(&[]), 4.0);
        let e = roundtrip("1 - (x - y)");
        assert_eq!(e.eval(&[1.0, 2.0]), 2.0);
        let e = roundtrip("x/(y*z)");
        assert_eq!(e.eval(&[8.0, 2.0, 2.0]), 2.0);
    }

    #[test]
    fn functions_and_constants() {
        let e = roundtrip("sqrt(x^2 + y^2) + ln(exp(z)) + sin(0)*cos(pi)");
        assert!((e.eval(&[3.0, 4.0, 1.5]) - 6.5).abs() < 1e-14);
    }

    #[test]
    fn symbolic_derivative_matches_closed_form() {
        let e = Expression::parse("x^2*y + sin(x*y) - sqrt(1 + y^2)").unwrap();
        let (x, y) = (0.4, -1.3);
        let dx = e.derivative(0).eval(&[x, y]);
        let dy = e.derivative(1).eval(&[x, y]);
        assert!((dx - (2.0 * x * y + y * (x * y).cos())).abs() < 1e-14);
        assert!((dy - (x * x + x * (x * y).cos() - y / (1.0 + y * y).sqrt())).abs() < 1e-14);
    }

    #[test]
    fn try_eval_reports_domain_errors() {
        let e = Expression::parse("ln(x)").unwrap();
        assert!(matches!(e.try_eval(&[-1.0]), Err(FinslerError::Eval(_))));
        assert!(e.try_eval(&[1.0]).is_ok());
    }

    #[test]
    fn matrix_field_rejects_asymmetry() {
        let a = Expression::parse("1").unwrap();
        let b = Expression::parse("x").unwrap();
        let err = ExprMatrixField::new(vec![vec![a.clone(), b], vec![a.clone(), a]]);
        assert!(matches!(err, Err(FinslerError::Validation(_))));
    }
}

use super::{Expression, Func};

use Expression::*;

fn is_const(e: &Expression, v: f64) -> bool {
    matches!(e, Const(c) if *c == v)
}

fn add(a: Expression, b: Expression) -> Expression {
    match (&a, &b) {
        (Const(x), Const(y)) => Const(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expression, b: Expression) -> Expression {
    match (&a, &b) {
        (Const(x), Const(y)) => Const(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => Sub(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expression) -> Expression {
    match a {
        Const(c) => Const(-c),
        Neg(inner) => *inner,
        other => Neg(Box::new(other)),
    }
}

fn mul(a: Expression, b: Expression) -> Expression {
    match (&a, &b) {
        (Const(x), Const(y)) => Const(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => Const(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expression, b: Expression) -> Expression {
    match (&a, &b) {
        _ if is_const(&a, 0.0) => Const(0.0),
        _ if is_const(&b, 1.0) => a,
        _ => Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expression, b: Expression) -> Expression {
    match (&a, &b) {
        _ if is_const(&b, 1.0) => a,
        _ if is_const(&b, 0.0) => Const(1.0),
        _ => Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expression) -> Expression {
    Call(f, Box::new(a))
}

pub(super) fn derivative(e: &Expression, var: usize) -> Expression {
    match e {
        Const(_) => Const(0.0),
        Var(i) => Const(if *i == var { 1.0 } else { 0.0 }),
        Neg(a) => neg(derivative(a, var)),
        Add(a, b) => add(derivative(a, var), derivative(b, var)),
        Sub(a, b) => sub(derivative(a, var), derivative(b, var)),
        Mul(a, b) => add(
            mul(derivative(a, var), (**b).clone()),
            mul((**a).clone(), derivative(b, var)),
        ),
        Div(a, b) => {
            let da = derivative(a, var);
            let db = derivative(b, var);
            if is_const(&db, 0.0) {
                div(da, (**b).clone())
            } else {
                div(
                    sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                    pow((**b).clone(), Const(2.0)),
                )
            }
        }
        Pow(a, b) => {
            let da = derivative(a, var);
            let db = derivative(b, var);
            if is_const(&db, 0.0) {
                // d(u^c) = c u^(c-1) u'
                let exponent = match **b {
                    Const(c) => Const(c - 1.0),
                    _ => sub((**b).clone(), Const(1.0)),
                };
                mul(mul((**b).clone(), pow((**a).clone(), exponent)), da)
            } else {
                // d(u^v) = u^v (v' ln u + v u'/u)
                mul(
                    e.clone(),
                    add(
                        mul(db, call(Func::Ln, (**a).clone())),
                        div(mul((**b).clone(), da), (**a).clone()),
                    ),
                )
            }
        }
        Call(f, a) => {
            let da = derivative(a, var);
            if is_const(&da, 0.0) {
                return Const(0.0);
            }
            let inner = (**a).clone();
            let outer = match f {
                Func::Sqrt => div(Const(0.5), call(Func::Sqrt, inner)),
                Func::Sin => call(Func::Cos, inner),
                Func::Cos => neg(call(Func::Sin, inner)),
                Func::Exp => call(Func::Exp, inner),
                Func::Ln => div(Const(1.0), inner),
            };
            mul(outer, da)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::Expression;
    use proptest::prelude::*;

    const SAMPLES: [&str; 6] = [
        "x^2 + y^2",
        "(sqrt(0.75*(x^2 + y^2) + (0.5*x)^2) - 0.5*x)/0.75",
        "4/(1 + x^2 + y^2)^2",
        "(1 - x^2 - y^2)/(1 + x^2 + y^2)",
        "exp(x*y)*cos(y) - ln(2 + sin(x))",
        "x^y + z",
    ];

    proptest! {
        #[test]
        fn symbolic_matches_central_differences(
            x in 0.1f64..0.9, y in 0.1f64..0.9, z in -1.0f64..1.0, which in 0usize..6
        ) {
            let e = Expression::parse(SAMPLES[which]).unwrap();
            let p = [x, y, z];
            for k in 0..3 {
                let d = e.derivative(k).eval(&p);
                let h = 1e-5;
                let mut a = p; a[k] += h;
                let mut b = p; b[k] -= h;
                let fd = (e.eval(&a) - e.eval(&b)) / (2.0 * h);
                prop_assert!((d - fd).abs() <= 1e-7 * (1.0 + d.abs()), "{} d/d{} {} vs {}", SAMPLES[which], k, d, fd);
            }
        }
    }

    #[test]
    fn simplification_drops_trivial_terms() {
        let e = Expression::parse("3*x + y").unwrap();
        assert_eq!(e.derivative(0), Expression::Const(3.0));
        assert_eq!(e.derivative(2), Expression::Const(0.0));
    }
}

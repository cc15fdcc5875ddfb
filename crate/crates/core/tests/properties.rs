use std::sync::Arc;

use finsler_core::calculus::{check_randers_gradient_lemma, finsler_gradient, legendre_inverse_at};
use finsler_core::field::{ConstantMatrix, FnVectorField, Matrix, ScalarField, Vector};
use finsler_core::metric::{reverse_metric, MetricSpec, Point, RiemannianMetric, TangentVector, WindField};
use proptest::prelude::*;

/// Randers data with constant `h = L L^T` and an affine wind scaled to `|W|_h <= 0.9` on the unit box.
fn randers(l: [f64; 3], w: [f64; 4], strength: f64) -> MetricSpec {
    let l = Matrix::from_row_slice(2, 2, &[l[0], 0.0, l[1], l[2]]);
    let h = &l * l.transpose();
    // |W|_h <= sqrt(max eig h) |W|.
    let lmax = h.symmetric_eigenvalues().max();
    let wmax = (w[0].abs() + 2.0 * w[1].abs()).hypot(w[2].abs() + 2.0 * w[3].abs()) + 1e-12;
    let scale = strength / (wmax * lmax.sqrt());
    let wind = FnVectorField::new(2, move |x: &Vector| {
        Vector::from_vec(vec![scale * (w[0] + w[1] * x[0]), scale * (w[2] + w[3] * x[1])])
    });
    MetricSpec::randers(RiemannianMetric::new(Arc::new(ConstantMatrix(h))), WindField::new(Arc::new(wind)))
}

fn smooth_function() -> ScalarField {
    ScalarField::from_fn("f", 2, |x| x[0] + 0.3 * x[1] * x[1] + 0.1 * (x[0] * x[1]).sin())
}

fn vec2(a: f64, b: f64) -> Vector {
    Vector::from_vec(vec![a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn legendre_roundtrip(
        l in (0.5f64..1.5, -0.5f64..0.5, 0.5f64..1.5),
        w in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        strength in 0.0f64..0.9,
        x in (-1.0f64..1.0, -1.0f64..1.0),
        v in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        prop_assume!(v.0.hypot(v.1) > 1e-3);
        let m = randers([l.0, l.1, l.2], [w.0, w.1, w.2, w.3], strength);
        let (x, v) = (vec2(x.0, x.1), vec2(v.0, v.1));
        let omega = m.legendre_at(&x, &v).unwrap();
        let (back, _) = legendre_inverse_at(&m, &x, &omega).unwrap();
        prop_assert!((back - &v).norm() <= 1e-10 * v.norm());
        let f = m.eval_at(&x, &v).unwrap();
        prop_assert!((omega.dot(&v) - f * f).abs() <= 1e-10 * f * f);
    }

    #[test]
    fn gradient_defining_property_and_randers_identities(
        l in (0.5f64..1.5, -0.5f64..0.5, 0.5f64..1.5),
        w in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        strength in 0.0f64..0.9,
        x in (-1.0f64..1.0, -1.0f64..1.0),
        u in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        let m = randers([l.0, l.1, l.2], [w.0, w.1, w.2, w.3], strength);
        let f = smooth_function();
        let p = Point::new(vec![x.0, x.1]);
        let x = p.to_vector();
        let grad = finsler_gradient(&m, &f, &p).unwrap();
        let g = m.fundamental_matrix(&x, &grad.gradient.components).unwrap();
        let df = f.differential(&x);
        let u = vec2(u.0, u.1);
        prop_assert!((df.dot(&u) - grad.gradient.components.dot(&(&g * &u))).abs() <= 1e-8 * (1.0 + df.norm()));
        let (a, b) = check_randers_gradient_lemma(&m, &f, &p).unwrap();
        prop_assert!(a <= 1e-6 && b <= 1e-6);
    }

    #[test]
    fn reverse_metric_is_an_involution(
        l in (0.5f64..1.5, -0.5f64..0.5, 0.5f64..1.5),
        w in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        strength in 0.0f64..0.9,
        x in (-1.0f64..1.0, -1.0f64..1.0),
        v in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let m = randers([l.0, l.1, l.2], [w.0, w.1, w.2, w.3], strength);
        let (x, v) = (vec2(x.0, x.1), vec2(v.0, v.1));
        let rev = reverse_metric(&m);
        let twice = reverse_metric(&rev);
        let fv = m.eval_at(&x, &v).unwrap();
        prop_assert!((rev.eval_at(&x, &(-&v)).unwrap() - fv).abs() <= 1e-12 * (1.0 + fv));
        prop_assert!((twice.eval_at(&x, &v).unwrap() - fv).abs() <= 1e-12 * (1.0 + fv));
    }

    #[test]
    fn zermelo_equation_holds(
        l in (0.5f64..1.5, -0.5f64..0.5, 0.5f64..1.5),
        w in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        strength in 0.0f64..0.9,
        x in (-1.0f64..1.0, -1.0f64..1.0),
        v in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        prop_assume!(v.0.hypot(v.1) > 1e-3);
        let m = randers([l.0, l.1, l.2], [w.0, w.1, w.2, w.3], strength);
        let (x, v) = (vec2(x.0, x.1), vec2(v.0, v.1));
        let (h, wind) = m.zermelo_data(&x).unwrap();
        let z = m.eval_at(&x, &v).unwrap();
        let y = &v / z - wind;
        prop_assert!((y.dot(&(&h * &y)) - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn tangent_vector_rejects_dimension_mismatch() {
    let err = TangentVector::new(Point::new(vec![0.0, 0.0]), Vector::from_vec(vec![1.0]));
    assert!(err.is_err());
}

use finsler_core::field::Vector;
use finsler_core::foliation::{check_finsler_partition, ParallelOptions};
use finsler_core::scenario::{example, sphere_chart_overlap};
use finsler_core::transnormal::check_transnormal;

#[test]
fn radial_wind_with_linear_f_is_transnormal() {
    let s = example("disc-linear").unwrap().primary().clone();
    let pts = s.transnormal_samples(80, 4).unwrap();
    let rep = check_transnormal(&s.metric, &s.f, &pts, &s.transnormal_options()).unwrap();
    assert!(rep.verdict, "spread {}", rep.spread_per_level);
    // Z(grad f) = |df| + df(W) = 1 + x.
    for row in &rep.b_table {
        assert!((row.b - (1.0 + row.level).powi(2)).abs() < 1e-9);
    }
}

#[test]
fn radial_wind_with_linear_f_is_a_finsler_partition() {
    let s = example("disc-linear").unwrap().primary().clone();
    let opts = ParallelOptions::new(s.geodesic_options());
    let rep = check_finsler_partition(&s.metric, &s.f, s.sampler.as_ref(), &s.partition_levels, 16, &opts).unwrap();
    assert!(rep.forward_parallel && rep.backward_parallel);
    assert!(rep.finsler_partition_verdict);
}

#[test]
fn sphere_charts_agree() {
    let ex = example("randers-sphere-height").unwrap();
    assert_eq!(ex.charts.len(), 2);
    assert!(sphere_chart_overlap(&ex.charts[0], &ex.charts[1], 64).unwrap() < 1e-10);
}

#[test]
fn random_points_respect_the_level_range() {
    let s = example("randers-sphere-height").unwrap().primary().clone();
    for x in s.random_regular_points(50, 3) {
        let t = s.f.eval(&x);
        assert!(t >= s.level_range.0 && t <= s.level_range.1);
        assert!(s.domain().contains(&Vector::from_column_slice(x.as_slice())));
    }
}

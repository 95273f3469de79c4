use std::f64::consts::{PI, TAU};

use mockfield::filaments::{
    advect_loop, circulation, circulation_checked, linking_number, pure_state_sample, AnalyticField,
    GridField2D, MarkerLoop, PointField,
};
use mockfield::ScalarField2D;
use proptest::prelude::*;

const EX: [f64; 3] = [1.0, 0.0, 0.0];
const EY: [f64; 3] = [0.0, 1.0, 0.0];
const EZ: [f64; 3] = [0.0, 0.0, 1.0];

fn hopf(n: usize) -> (MarkerLoop, MarkerLoop) {
    (
        MarkerLoop::circle([0.0; 3], 1.0, EX, EY, n).unwrap(),
        MarkerLoop::circle([0.0, 1.0, 0.0], 1.0, EY, EZ, n).unwrap(),
    )
}

#[test]
fn shear_flow_maps_points_linearly() {
    let l = MarkerLoop::circle([0.3, -0.2, 0.0], 0.7, EX, EY, 64).unwrap();
    let v = |p: [f64; 3], _t: f64| [p[1], 0.0, 0.0];
    let out = advect_loop(&l, &v, 0.0, 0.01, 150, false).unwrap();
    for (p, q) in out.points().iter().zip(l.points()) {
        assert!((p[0] - (q[0] + 1.5 * q[1])).abs() < 1e-12);
        assert!((p[1] - q[1]).abs() < 1e-15);
    }
}

#[test]
fn rigid_rotation_over_a_period() {
    let l = MarkerLoop::circle([0.0; 3], 1.0, EX, EZ, 48).unwrap();
    let v = |p: [f64; 3], _t: f64| [-p[2], 0.0, p[0]];
    let out = advect_loop(&l, &v, 0.0, TAU / 1000.0, 1000, false).unwrap();
    for (p, q) in out.points().iter().zip(l.points()) {
        let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        assert!(d < 1e-10);
    }
}

#[test]
fn circulation_closed_forms() {
    let rot = AnalyticField::parse(["-y/2", "x/2", "0"]).unwrap();
    let l = MarkerLoop::circle([0.0; 3], 1.0, EX, EY, 64).unwrap();
    assert!((circulation(&rot, &l, 0.0).unwrap() - PI).abs() < 1e-13);
    assert!((circulation(&rot, &l.reversed(), 0.0).unwrap() + PI).abs() < 1e-13);

    let grad = AnalyticField::parse(["cos(x) * cos(y)", "-sin(x) * sin(y)", "2 * z"]).unwrap();
    let tilted = MarkerLoop::circle([0.4, 0.1, -0.3], 1.3, [0.6, 0.8, 0.0], [0.0, 0.0, 1.0], 64).unwrap();
    assert!(circulation(&grad, &tilted, 0.0).unwrap().abs() < 1e-12);
}

#[test]
fn error_estimate_shrinks_with_markers() {
    let f = AnalyticField::parse(["-y * cos(x)", "x + sin(y)", "0"]).unwrap();
    let coarse = MarkerLoop::circle([0.0; 3], 1.0, EX, EY, 16).unwrap();
    let fine = MarkerLoop::circle([0.0; 3], 1.0, EX, EY, 64).unwrap();
    let a = circulation_checked(&f, &coarse, 0.0, Some(0.1)).unwrap();
    let b = circulation_checked(&f, &fine, 0.0, Some(0.1)).unwrap();
    assert!(b.error_estimate < a.error_estimate);
}

#[test]
fn kelvin_circulation_in_a_steady_cellular_flow() {
    let v = AnalyticField::parse(["sin(x) * cos(y)", "-cos(x) * sin(y)", "0"]).unwrap();
    let l = MarkerLoop::circle([1.0, 0.7, 0.0], 0.5, EX, EY, 256).unwrap();
    let g0 = circulation(&v, &l, 0.0).unwrap();
    let out = advect_loop(&l, &v, 0.0, 1e-2, 100, false).unwrap();
    let g1 = circulation(&v, &out, 1.0).unwrap();
    assert!((g1 - g0).abs() < 1e-8 * g0.abs().max(1.0), "{g0} -> {g1}");
}

#[test]
fn grid_field_matches_analytic_velocity() {
    let phi = ScalarField2D::from_fn_2pi(32, |x, y| x.sin() * y.sin()).unwrap();
    let g = GridField2D::from_stream_function(&phi);
    for p in [[0.3, 1.7, 0.0], [5.1, 2.2, 0.0], [-1.0, 8.0, 0.0]] {
        let v = g.eval(p, 0.0).unwrap();
        assert!((v[0] - p[0].sin() * p[1].cos()).abs() < 1e-12);
        assert!((v[1] + p[0].cos() * p[1].sin()).abs() < 1e-12);
    }
}

#[test]
fn hopf_pair_links_once() {
    let (a, b) = hopf(256);
    let r = linking_number(&a, &b).unwrap();
    assert_eq!(r.integer.abs(), 1);
    assert!(r.deviation < 1e-3);
    let swapped = linking_number(&b, &a).unwrap();
    assert!((swapped.raw - r.raw).abs() < 1e-12);
    assert_eq!(linking_number(&a, &b.reversed()).unwrap().integer, -r.integer);
}

#[test]
fn coplanar_disjoint_circles_do_not_link() {
    let a = MarkerLoop::circle([0.0; 3], 1.0, EX, EY, 64).unwrap();
    let b = MarkerLoop::circle([3.0, 1.0, 0.0], 0.8, EX, EY, 64).unwrap();
    assert!(linking_number(&a, &b).unwrap().raw.abs() < 1e-12);
}

#[test]
fn linking_survives_volume_preserving_flow() {
    let abc = AnalyticField::parse(["sin(z) + cos(y)", "sin(x) + cos(z)", "sin(y) + cos(x)"]).unwrap();
    let (a, b) = hopf(256);
    let before = linking_number(&a, &b).unwrap();
    let a1 = advect_loop(&a, &abc, 0.0, 1e-2, 30, true).unwrap();
    let b1 = advect_loop(&b, &abc, 0.0, 1e-2, 30, true).unwrap();
    let after = linking_number(&a1, &b1).unwrap();
    assert_eq!(after.integer, before.integer);
    assert!(after.deviation < 1e-2, "deviation {}", after.deviation);
}

#[test]
fn point_sample_of_cosine() {
    let psi = ScalarField2D::from_fn_2pi(16, |x, _| x.cos()).unwrap();
    for x in [0.0, 0.37, 2.0, 4.4] {
        assert!((pure_state_sample(&psi, [x, 0.9]) - x.cos()).abs() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linking_of_random_rigid_placements(
        angle in 0.0..TAU,
        shift in -0.4f64..0.4,
        far in prop::bool::ANY,
    ) {
        // Rotate the pair about z and slide the second circle along its own plane.
        let (c, s) = (angle.cos(), angle.sin());
        let e1 = [c, s, 0.0];
        let e2 = [-s, c, 0.0];
        let a = MarkerLoop::circle([0.0; 3], 1.0, e1, e2, 256).unwrap();
        let off = if far { 3.0 } else { 1.0 + shift };
        let b = MarkerLoop::circle([-s * off, c * off, 0.0], 1.0, e2, EZ, 256).unwrap();
        let r = linking_number(&a, &b).unwrap();
        prop_assert_eq!(r.integer.abs(), if far { 0 } else { 1 });
        prop_assert!(r.deviation < 1e-2);
    }
}

use mockfield::findim::{
    canonical_matrix, extend_canonize, jacobi_residual, kernel_basis, trajectory, unfreeze_sim,
    PoissonMatrixModel,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const SO3_J: [[&str; 3]; 3] = [["0", "m3", "-m2"], ["-m3", "0", "m1"], ["m2", "-m1", "0"]];
const SO3_C: &str = "(m1^2 + m2^2 + m3^2)/2";

fn so3(h: &str) -> PoissonMatrixModel {
    let rows: Vec<&[&str]> = SO3_J.iter().map(|r| r.as_slice()).collect();
    PoissonMatrixModel::new(&["m1", "m2", "m3"], &rows, h, &[SO3_C]).unwrap()
}

/// Two canonical pairs and one Casimir coordinate.
fn five_dim() -> PoissonMatrixModel {
    PoissonMatrixModel::new(
        &["q1", "q2", "p1", "p2", "c"],
        &[
            &["0", "0", "1", "0", "0"],
            &["0", "0", "0", "1", "0"],
            &["-1", "0", "0", "0", "0"],
            &["0", "-1", "0", "0", "0"],
            &["0", "0", "0", "0", "0"],
        ],
        "(p1^2 + p2^2)/2 + (1 + c^2) * (q1^2 + q2^2)/2 + q1 * q2 / 4",
        &["c"],
    )
    .unwrap()
}

fn probes() -> Vec<Vec<f64>> {
    (0..12)
        .map(|i| {
            let t = i as f64;
            (0..5).map(|k| ((1.3 + k as f64) * t + 0.2 * k as f64).sin()).collect()
        })
        .collect()
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

#[test]
fn canonical_block_has_zero_jacobiator() {
    let m = five_dim();
    assert_eq!(jacobi_residual(&m, &probes()), 0.0);
    assert_eq!(m.antisymmetry_residual(&probes()), 0.0);
    assert_eq!(m.casimir_residual(&probes()), 0.0);
}

#[test]
fn kernel_dimensions() {
    let m = so3("m1");
    assert_eq!(kernel_basis(&m, &[0.3, -0.2, 0.9]).nu, 1);
    assert_eq!(kernel_basis(&m, &[0.0; 3]).nu, 3);
    assert_eq!(kernel_basis(&five_dim(), &[0.1; 5]).nu, 1);
}

#[test]
fn extended_matrix_for_four_dimensions() {
    let m = PoissonMatrixModel::new(
        &["q", "p", "a", "b"],
        &[&["0", "1", "0", "0"], &["-1", "0", "0", "0"], &["0", "0", "0", "0"], &["0", "0", "0", "0"]],
        "p^2/2 + q^2/2 + a * b",
        &["a", "b"],
    )
    .unwrap();
    let e = extend_canonize(&m, 2, &probes().iter().map(|p| p[..4].to_vec()).collect::<Vec<_>>()).unwrap();
    assert_eq!(e.j_ex().nrows(), 6);
    assert_eq!((e.j_ex() + e.j_ex().transpose()).abs().max(), 0.0);
    assert!((e.j_ex().determinant() - 1.0).abs() < 1e-14);
    assert_eq!(e.vars(), &["q", "p", "a", "b", "theta1", "theta2"]);
}

#[test]
fn zero_extension_leaves_canonical_matrix() {
    let m = PoissonMatrixModel::new(
        &["q1", "q2", "p1", "p2"],
        &[
            &["0", "0", "1", "0"],
            &["0", "0", "0", "1"],
            &["-1", "0", "0", "0"],
            &["0", "-1", "0", "0"],
        ],
        "0",
        &[],
    )
    .unwrap();
    let e = extend_canonize(&m, 0, &[]).unwrap();
    assert_eq!(e.j_ex(), &canonical_matrix(4));
}

#[test]
fn extended_matrix_is_well_conditioned() {
    let e = extend_canonize(&five_dim(), 1, &probes()).unwrap();
    let j = e.j_ex();
    let inv = j.clone().try_inverse().unwrap();
    let err = (j * &inv - DMatrix::<f64>::identity(6, 6)).abs().max();
    assert!(err < 1e-14);
    let smin = j.clone().svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(smin >= 1.0 - 1e-14);
}

#[test]
fn non_darboux_models_are_refused() {
    assert!(extend_canonize(&so3("m1"), 1, &probes().iter().map(|p| p[..3].to_vec()).collect::<Vec<_>>()).is_err());
    assert!(extend_canonize(&five_dim(), 2, &probes()).is_err());
}

#[test]
fn frozen_casimir_over_long_horizon() {
    let e = extend_canonize(&five_dim(), 1, &probes()).unwrap();
    let h1 = e.parse_perturbation("c * cos(theta)").unwrap();
    let z0 = [1.0, -0.4, 0.0, 0.3, 0.5];
    let r0 = unfreeze_sim(&e, Some(&h1), 0.0, &z0, &[0.2], 1e-3, 100.0, 1000).unwrap();
    assert!(r0.casimir_drift() < 1e-12);
    let r1 = unfreeze_sim(&e, Some(&h1), 1e-2, &z0, &[0.2], 1e-3, 100.0, 1000).unwrap();
    assert!(r1.energy_drift() < 1e-8, "{}", r1.energy_drift());
    assert!(r1.casimir_drift() > 1e3 * r0.casimir_drift().max(1e-12));
}

#[test]
fn unfrozen_rate_matches_perturbation() {
    let e = extend_canonize(&five_dim(), 1, &probes()).unwrap();
    let h1 = e.parse_perturbation("c * cos(theta)").unwrap();
    let (eps, c0, th0, dt) = (1e-2, 0.5, 0.7, 1e-4);
    let r = unfreeze_sim(&e, Some(&h1), eps, &[1.0, 0.0, 0.0, 0.0, c0], &[th0], dt, 2.0 * dt, 1).unwrap();
    // Centred difference of dC/dt = eps C sin(theta) at t = dt.
    let rate = (r.casimirs[2][0] - r.casimirs[0][0]) / (2.0 * dt);
    let mid = &r.states[1];
    let want = eps * mid[4] * mid[5].sin();
    assert!((rate - want).abs() < 1e-9 * want.abs(), "{rate} vs {want}");
}

#[test]
fn so3_casimir_is_conserved() {
    let m = so3("m1^2/2 + m2^2/3 + m3^2/5");
    let (_, states) = trajectory(&m, &[0.3, 1.0, -0.6], 1e-3, 10.0, 100).unwrap();
    let c = |z: &[f64]| m.casimirs()[0].eval(z);
    let c0 = c(&states[0]);
    let drift = states.iter().map(|z| (c(z) - c0).abs()).fold(0.0, f64::max) / c0.abs().max(1.0);
    assert!(drift < 1e-8);
}

#[test]
fn shifting_by_the_casimir_leaves_trajectories() {
    let base = "m1^2/2 + m2^2/3 + m3^2/5";
    let z0 = [0.3, 1.0, -0.6];
    let (_, a) = trajectory(&so3(base), &z0, 1e-3, 10.0, 10).unwrap();
    for mu in [-1.0, 0.5] {
        let shifted = so3(&format!("{base} - ({mu}) * {SO3_C}"));
        let (_, b) = trajectory(&shifted, &z0, 1e-3, 10.0, 10).unwrap();
        assert!(max_diff(&a, &b) < 1e-10, "mu = {mu}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lie_poisson_models_satisfy_jacobi(
        a in -2.0f64..2.0,
        pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..6),
    ) {
        // Structure constants n_k eps_ijk with n = (1, 1, a) satisfy Jacobi for any a.
        let s = format!("{a} * m3");
        let neg = format!("-{a} * m3");
        let m = PoissonMatrixModel::new(
            &["m1", "m2", "m3"],
            &[&["0", &s, "-m2"], &[&neg, "0", "m1"], &["m2", "-m1", "0"]],
            "m1",
            &[],
        )
        .unwrap();
        let r = jacobi_residual(&m, &pts);
        let scale = pts.iter().flatten().fold(1.0f64, |acc, v| acc.max(v.abs()));
        prop_assert!(r < 1e-14 * scale * (1.0 + a.abs()), "residual {}", r);
    }

    #[test]
    fn quadratic_perturbation_is_detected(b in 0.1f64..2.0) {
        let e01 = format!("m3 + {b} * m1^2");
        let e10 = format!("-m3 - {b} * m1^2");
        let m = PoissonMatrixModel::new(
            &["m1", "m2", "m3"],
            &[&["0", &e01, "-m2"], &[&e10, "0", "m1"], &["m2", "-m1", "0"]],
            "m1",
            &[],
        )
        .unwrap();
        let pts = vec![vec![1.0, 0.5, -0.3], vec![-0.7, 1.2, 0.4]];
        prop_assert!(jacobi_residual(&m, &pts) > 1e-3 * b);
    }
}

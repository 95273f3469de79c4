mod common;

use std::f64::consts::{PI, TAU};

use common::{field, random_rms};
use mockfield::field3d::{curl_inverse, gradient, integrate_dot, Grid3D, VectorField3D};
use mockfield::hierarchy::{run, RunConfig};
use mockfield::invariants::{
    casimir2d, casimir3d, default_tolerance, drift_report, InvariantSpec, Role,
};
use mockfield::{Hamiltonian2D, HierarchyState, Invariant, InvariantSeries, SystemTag, WeightFunction};
use proptest::prelude::*;

fn cube_drift(n: usize, omega: &mockfield::ScalarField2D) -> f64 {
    let s0 = HierarchyState::system_i(omega.clone()).unwrap();
    let cfg = RunConfig {
        dt: 2e-3,
        t_end: 10.0,
        sample_every: 50,
        invariants: vec![
            InvariantSpec::new(Invariant::C0, WeightFunction::Square),
            InvariantSpec::new(Invariant::C0, WeightFunction::Cube),
        ],
        keep_states: false,
    };
    let traj = run(&s0, &Hamiltonian2D::Euler, &cfg).unwrap();
    assert!(traj.series.drift(0) < 1e-6, "square drift at {n}: {}", traj.series.drift(0));
    traj.series.drift(1)
}

fn skewed_flow(n: usize) -> mockfield::ScalarField2D {
    let base = field(n, |x, y| 0.3 * (x.cos() + 0.8 * y.cos() + 0.6 * (x + y).cos()));
    base.axpy(0.05, &random_rms(n, 3, 0.3, 2)).unwrap().dealiased()
}

#[test]
fn closed_form_values() {
    let c = field(32, |x, _| x.cos());
    let s1 = HierarchyState::system_i(c.clone()).unwrap();
    let sq = casimir2d(&s1, Invariant::C0, &WeightFunction::Square).unwrap();
    assert!((sq - 2.0 * PI * PI).abs() < 1e-12);
    assert!(casimir2d(&s1, Invariant::C0, &WeightFunction::Cube).unwrap().abs() < 1e-12);

    let s2 = HierarchyState::system_ii(c.clone(), field(32, |_, y| y.cos())).unwrap();
    assert!(casimir2d(&s2, Invariant::C1, &WeightFunction::Identity).unwrap().abs() < 1e-12);
    let e = Hamiltonian2D::Rmhd.value(&s2).unwrap();
    assert!((e - 2.0 * PI * PI).abs() < 1e-12);

    let s3 = HierarchyState::system_iii(c.clone(), c.clone(), c).unwrap();
    let c3 = casimir2d(&s3, Invariant::C3, &WeightFunction::Identity).unwrap();
    assert!((c3 - 2.0 * PI * PI).abs() < 1e-12);
}

#[test]
fn applicability_follows_the_table() {
    use Invariant::*;
    use SystemTag::*;
    for (inv, tag, role) in [
        (Energy, I, Some(Role::Energy)),
        (C0, I, Some(Role::Casimir)),
        (C1, I, None),
        (C1, II, Some(Role::Casimir)),
        (C2, II, Some(Role::Casimir)),
        (C3, II, None),
        (C1, III, Some(Role::Symmetry)),
        (C3, III, Some(Role::Casimir)),
        (C4, III, Some(Role::Casimir)),
        (C0, III, None),
    ] {
        assert_eq!(inv.role(tag).ok(), role, "{inv:?} on {tag:?}");
    }
}

#[test]
fn expression_weights_match_builtins() {
    let w = random_rms(32, 5, 1.0, 19);
    let s = HierarchyState::system_i(w).unwrap();
    let a = casimir2d(&s, Invariant::C0, &WeightFunction::Cube).unwrap();
    let b = casimir2d(&s, Invariant::C0, &WeightFunction::parse("s^3").unwrap()).unwrap();
    assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
}

#[test]
fn drift_of_constant_series_is_zero() {
    let mut s = InvariantSeries::new(vec!["H".into(), "C0".into()], vec![Role::Energy, Role::Casimir]);
    for i in 0..10 {
        s.push(i as f64, vec![0.25, -40.0]);
    }
    let r = drift_report(&s, default_tolerance);
    assert!(r.all_pass());
    assert!(r.entries.iter().all(|e| e.drift == 0.0));
}

#[test]
fn drift_flags_a_jump() {
    let mut s = InvariantSeries::new(vec!["C2".into()], vec![Role::Casimir]);
    s.push(0.0, vec![0.5]);
    s.push(1.0, vec![0.5 + 1e-3]);
    s.push(2.0, vec![0.5]);
    let r = drift_report(&s, default_tolerance);
    assert!((r.entries[0].drift - 1e-3).abs() < 1e-12);
    assert!(!r.all_pass());
}

#[test]
fn symmetry_conserved_cross_term_with_custom_hamiltonian() {
    use mockfield::hierarchy::{CustomHamiltonian, FieldRef, QuadraticForm, QuadraticTerm};
    let h = Hamiltonian2D::Custom(
        CustomHamiltonian::new(vec![
            QuadraticTerm { field: FieldRef::Omega, form: QuadraticForm::Kinetic, weight: 1.0 },
            QuadraticTerm { field: FieldRef::Psi, form: QuadraticForm::Dirichlet, weight: 2.0 },
        ])
        .unwrap(),
    );
    let s0 = HierarchyState::system_iii(
        random_rms(32, 4, 1.0, 31).dealiased(),
        random_rms(32, 4, 0.2, 32).dealiased(),
        random_rms(32, 4, 0.2, 33).dealiased(),
    )
    .unwrap();
    let cfg = RunConfig {
        dt: 2e-3,
        t_end: 2.0,
        sample_every: 25,
        invariants: vec![InvariantSpec::with_default_weight(Invariant::C1)],
        keep_states: false,
    };
    let traj = run(&s0, &h, &cfg).unwrap();
    assert_eq!(traj.series.roles(), &[Role::Symmetry]);
    assert!(traj.series.drift(0) < 1e-5);
}

#[test]
fn cubic_vorticity_casimir_on_random_flow() {
    let w = random_rms(64, 6, 1.0, 1).dealiased();
    let d = cube_drift(64, &w);
    assert!(d < 1e-6, "cubic weight drift {d}");
}

#[test]
fn cubic_vorticity_casimir_converges_with_resolution() {
    let d: Vec<f64> = [32, 64].iter().map(|&n| cube_drift(n, &skewed_flow(n))).collect();
    assert!(d[1] < d[0] / 8.0, "{d:?}");
}

#[test]
fn helicities_of_a_beltrami_field() {
    let g = Grid3D::cube_2pi(16).unwrap();
    let b = VectorField3D::from_fn(g, |[x, _, _]| [0.0, x.sin(), x.cos()]);
    let rho = vec![1.0; g.len()];
    let c = casimir3d(&rho, &VectorField3D::zeros(g), &b, &b).unwrap();
    let vol = TAU.powi(3);
    assert!((c.magnetic_helicity - 0.5 * vol).abs() < 1e-10);
    assert!((c.mock_cross_helicity - 2.0 * c.magnetic_helicity).abs() < 1e-10);
    assert!((c.mock_helicity - c.magnetic_helicity).abs() < 1e-10);
    assert_eq!(c.cross_helicity, 0.0);
}

#[test]
fn helicity_is_gauge_independent() {
    let g = Grid3D::cube_2pi(16).unwrap();
    let b = VectorField3D::from_fn(g, |[x, y, z]| {
        [z.sin() + y.cos(), x.sin() + z.cos(), y.sin() + x.cos()]
    });
    let a = curl_inverse(&b);
    let chi = g.sample(|[x, y, z]| (x + 2.0 * y).sin() * z.cos() + (3.0 * z).cos());
    let a2 = a.axpy(1.0, &gradient(&g, &chi).unwrap()).unwrap();
    let h1 = integrate_dot(&a, &b).unwrap();
    let h2 = integrate_dot(&a2, &b).unwrap();
    assert!((h1 - h2).abs() < 1e-10 * h1.abs().max(1.0));
}

#[test]
fn non_solenoidal_field_is_rejected() {
    let g = Grid3D::cube_2pi(8).unwrap();
    let b = VectorField3D::from_fn(g, |[x, _, _]| [x.sin(), 0.0, 0.0]);
    let rho = vec![1.0; g.len()];
    assert!(casimir3d(&rho, &VectorField3D::zeros(g), &b, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reduction_with_equal_fields(seed in any::<u64>()) {
        let w = random_rms(32, 6, 1.0, seed);
        let s1 = HierarchyState::system_i(w.clone()).unwrap();
        let s2 = HierarchyState::system_ii(w.clone(), w).unwrap();
        let c0 = casimir2d(&s1, Invariant::C0, &WeightFunction::Square).unwrap();
        let c1 = casimir2d(&s2, Invariant::C1, &WeightFunction::Identity).unwrap();
        let c2 = casimir2d(&s2, Invariant::C2, &WeightFunction::Square).unwrap();
        prop_assert!((c1 - c0).abs() < 1e-12 * c0.max(1.0));
        prop_assert!((c2 - c0).abs() < 1e-12 * c0.max(1.0));
    }
}

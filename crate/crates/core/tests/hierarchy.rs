mod common;

use std::f64::consts::PI;

use common::{field, random_rms};
use mockfield::hierarchy::{
    run, step_rk4, CustomHamiltonian, FieldRef, QuadraticForm, QuadraticTerm, RunConfig,
};
use mockfield::invariants::{drift_report, default_tolerance, InvariantSpec};
use mockfield::{Hamiltonian2D, HierarchyState, Invariant};
use proptest::prelude::*;

fn advance(s: &HierarchyState, h: &Hamiltonian2D, dt: f64, steps: usize) -> HierarchyState {
    (0..steps).fold(s.clone(), |s, _| step_rk4(&s, h, dt).unwrap())
}

fn mixed_h() -> Hamiltonian2D {
    Hamiltonian2D::Custom(
        CustomHamiltonian::new(vec![
            QuadraticTerm { field: FieldRef::Omega, form: QuadraticForm::Kinetic, weight: 1.0 },
            QuadraticTerm { field: FieldRef::Psi, form: QuadraticForm::Dirichlet, weight: 0.5 },
            QuadraticTerm { field: FieldRef::Psi, form: QuadraticForm::Mass, weight: 0.3 },
        ])
        .unwrap(),
    )
}

#[test]
fn rk4_is_fourth_order() {
    let s0 = HierarchyState::system_i(random_rms(32, 4, 1.0, 3).dealiased()).unwrap();
    let h = Hamiltonian2D::Euler;
    let t = 0.8;
    let reference = advance(&s0, &h, 0.008, 100);
    let coarse = advance(&s0, &h, 0.08, 10);
    let fine = advance(&s0, &h, 0.04, 20);
    let e1 = coarse.max_abs_diff(&reference).unwrap();
    let e2 = fine.max_abs_diff(&reference).unwrap();
    assert!(e2 > 1e-12, "error {e2} too small to measure at t = {t}");
    let ratio = e1 / e2;
    assert!((12.8..=19.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn euler_energy_of_single_mode() {
    let s = HierarchyState::system_i(field(32, |x, _| x.cos())).unwrap();
    let e = Hamiltonian2D::Euler.value(&s).unwrap();
    assert!((e - PI * PI).abs() < 1e-12);
}

#[test]
fn steady_states_stay_put() {
    let h = Hamiltonian2D::Euler;
    let s0 = HierarchyState::system_i(field(32, |x, y| x.cos() + 0.5 * y.sin())).unwrap();
    let s = advance(&s0, &h, 0.01, 50);
    assert!(s.max_abs_diff(&s0).unwrap() < 1e-12);
}

#[test]
fn runs_reverse_over_a_hundred_steps() {
    let s0 = HierarchyState::system_iii(
        random_rms(32, 4, 1.0, 8).dealiased(),
        random_rms(32, 4, 0.2, 9).dealiased(),
        random_rms(32, 4, 0.2, 10).dealiased(),
    )
    .unwrap();
    let h = Hamiltonian2D::Rmhd;
    let back = advance(&advance(&s0, &h, 2e-3, 100), &h, -2e-3, 100);
    assert!(back.max_abs_diff(&s0).unwrap() / s0.max_abs() < 1e-10);
}

#[test]
fn mock_field_does_not_feed_back_with_custom_hamiltonian() {
    let w = random_rms(32, 4, 1.0, 1).dealiased();
    let p = random_rms(32, 4, 0.2, 2).dealiased();
    let c = random_rms(32, 4, 0.2, 3).dealiased();
    let h = mixed_h();
    let s2 = advance(&HierarchyState::system_ii(w.clone(), p.clone()).unwrap(), &h, 5e-3, 60);
    let s3 = advance(&HierarchyState::system_iii(w, p, c).unwrap(), &h, 5e-3, 60);
    assert!(common::max_diff(s2.omega().values(), s3.omega().values()) < 1e-12);
    assert!(common::max_diff(s2.psi().unwrap().values(), s3.psi().unwrap().values()) < 1e-12);
}

#[test]
fn custom_hamiltonian_conserves_its_list() {
    let s0 = HierarchyState::system_iii(
        random_rms(32, 4, 1.0, 11).dealiased(),
        random_rms(32, 4, 0.2, 12).dealiased(),
        random_rms(32, 4, 0.2, 13).dealiased(),
    )
    .unwrap();
    let invariants = [Invariant::Energy, Invariant::C1, Invariant::C2, Invariant::C3, Invariant::C4]
        .into_iter()
        .map(InvariantSpec::with_default_weight)
        .collect();
    let cfg = RunConfig { dt: 5e-3, t_end: 2.0, sample_every: 20, invariants, keep_states: false };
    let traj = run(&s0, &mixed_h(), &cfg).unwrap();
    let report = drift_report(&traj.series, default_tolerance);
    for e in &report.entries {
        assert!(e.pass, "{} drift {}", e.name, e.drift);
    }
}

#[test]
fn sampling_keeps_endpoints() {
    let s0 = HierarchyState::system_i(random_rms(16, 3, 1.0, 6).dealiased()).unwrap();
    let cfg = RunConfig {
        dt: 0.03,
        t_end: 0.1,
        sample_every: 2,
        invariants: vec![InvariantSpec::with_default_weight(Invariant::C0)],
        keep_states: true,
    };
    let traj = run(&s0, &Hamiltonian2D::Euler, &cfg).unwrap();
    let times = traj.series.times();
    assert_eq!(times.first(), Some(&0.0));
    assert!((times.last().unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(traj.samples.len(), times.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mean_is_preserved(seed in any::<u64>()) {
        let w = random_rms(16, 3, 1.0, seed).dealiased();
        let p = random_rms(16, 3, 0.3, seed ^ 1).dealiased().map(|v| v + 0.7);
        let c = random_rms(16, 3, 0.3, seed ^ 2).dealiased().map(|v| v - 1.3);
        let s0 = HierarchyState::system_iii(w, p, c).unwrap();
        let s = advance(&s0, &Hamiltonian2D::Rmhd, 5e-3, 10);
        prop_assert!(s.omega().mean().abs() < 1e-13);
        prop_assert!((s.psi().unwrap().mean() - 0.7).abs() < 1e-12);
        prop_assert!((s.psicheck().unwrap().mean() + 1.3).abs() < 1e-12);
    }

    #[test]
    fn zero_flux_matches_vortex_system(seed in any::<u64>()) {
        let w = random_rms(16, 3, 1.0, seed).dealiased();
        let zero = w.map(|_| 0.0);
        let s1 = advance(&HierarchyState::system_i(w.clone()).unwrap(), &Hamiltonian2D::Euler, 1e-2, 5);
        let s2 = advance(&HierarchyState::system_ii(w, zero).unwrap(), &Hamiltonian2D::Rmhd, 1e-2, 5);
        prop_assert_eq!(s1.omega().values(), s2.omega().values());
    }
}

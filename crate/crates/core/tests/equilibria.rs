use std::f64::consts::{PI, TAU};

use mockfield::equilibria::{
    ec_gradient_residual, eigenvalue_shells, find_resonant_surface, regularized_comparison,
    singular_kernel, solve_beltrami, tearing_equilibrium, MultiplierSet, SlabEquilibrium,
};
use mockfield::field3d::{divergence_norm, Grid3D, VectorField3D};
use num_complex::Complex64;
use proptest::prelude::*;

/// Sorted distinct `|k|` by brute force over a lattice box.
fn shells_oracle(periods: [f64; 3], reach: i64, count: usize) -> Vec<f64> {
    let mut ks = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            for c in -reach..=reach {
                if (a, b, c) == (0, 0, 0) {
                    continue;
                }
                let k = [a, b, c]
                    .iter()
                    .zip(periods)
                    .map(|(&m, l)| (TAU * m as f64 / l).powi(2))
                    .sum::<f64>()
                    .sqrt();
                ks.push(k);
            }
        }
    }
    ks.sort_by(f64::total_cmp);
    ks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * *b);
    ks.truncate(count);
    ks
}

fn bisection_oracle(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(m) * fa > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn beltrami_snaps_to_nearest_shell() {
    let g = Grid3D::cube_2pi(16).unwrap();
    let s = solve_beltrami(&g, 1.3).unwrap();
    assert_eq!(s.mu, 2f64.sqrt());
    assert!(divergence_norm(&s.field) < 1e-12);
    assert!(s.residual < 1e-12);
}

#[test]
fn shells_on_stretched_box() {
    let periods = [TAU, 2.0 * TAU, TAU];
    let got = eigenvalue_shells(periods, 6);
    let want = shells_oracle(periods, 4, 6);
    assert_eq!(got.len(), 6);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-14, "{got:?} vs {want:?}");
    }
    assert_eq!(got[0], 0.5);
}

#[test]
fn unresolvable_mode_is_rejected() {
    let g = Grid3D::cube_2pi(4).unwrap();
    assert!(solve_beltrami(&g, 3.0).is_err());
}

#[test]
fn aligned_flow_equilibrium_closed_form() {
    let g = Grid3D::cube_2pi(16).unwrap();
    let sol = solve_beltrami(&g, -2f64.sqrt()).unwrap();
    let b = sol.field;
    let (rho0, mu3) = (1.4, 0.6);
    let v = b.scale(mu3 / rho0);
    let base = MultiplierSet::default();
    // Single-mode Beltrami fields have |B| = 1 everywhere.
    let mu1 = 0.5 * (mu3 / rho0).powi(2) + base.enthalpy(rho0);
    let mu2 = sol.mu * (1.0 - mu3 * mu3 / rho0);
    let m = MultiplierSet { mu1, mu2, mu3, rho0, ..base };
    let rho = vec![rho0; g.len()];
    let r = ec_gradient_residual(&rho, &v, &b, None, &m).unwrap();
    assert!(r.max() < 1e-12, "{r:?}");

    let off = MultiplierSet { mu2: mu2 + 1e-3, ..m };
    assert!(ec_gradient_residual(&rho, &v, &b, None, &off).unwrap().curl > 1e-4);
}

#[test]
fn mock_field_shares_the_eigenvalue() {
    let g = Grid3D::cube_2pi(8).unwrap();
    let b = solve_beltrami(&g, 2f64.sqrt()).unwrap().field;
    let base = MultiplierSet::default();
    let m = MultiplierSet { mu1: base.enthalpy(1.0), mu2: 0.4, mu4: 2f64.sqrt() - 0.4, ..base };
    let rho = vec![1.0; g.len()];
    let z = VectorField3D::zeros(g);
    assert!(ec_gradient_residual(&rho, &z, &b, Some(&b), &m).unwrap().max() < 1e-12);
}

#[test]
fn resonance_roots_match_bisection() {
    let s = SlabEquilibrium::new(0.0, TAU, "sin(x) + 0.3", "0", [1.0, 0.0]).unwrap();
    let scan = find_resonant_surface(&s, 200);
    let f = |x: f64| x.sin() + 0.3;
    let want = [bisection_oracle(f, 3.0, 3.5), bisection_oracle(f, 5.5, 6.2)];
    assert_eq!(scan.roots.len(), 2);
    for (a, b) in scan.roots.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert!((want[0] - (PI + 0.3f64.asin())).abs() < 1e-12);
}

#[test]
fn step_profile_and_sheet_sign() {
    let s = SlabEquilibrium::new(-1.0, 1.0, "tanh(x/0.5)", "1", [1.0, 0.0]).unwrap();
    let c0 = Complex64::new(0.2, 0.1);
    let c1 = Complex64::new(1.0, -0.4);
    let k = singular_kernel(&s, 0.0, c0, c1).unwrap();
    assert_eq!(k.theta(-1e-12), c0);
    assert_eq!(k.theta(1e-12), c0 + c1);
    assert_eq!(k.theta(0.0), c0 + 0.5 * c1);
    let flipped = singular_kernel(&s, 0.0, c0, -c1).unwrap();
    assert_eq!(flipped.sheet_strength, -k.sheet_strength);
}

#[test]
fn vanishing_axial_field_at_resonance_is_an_error() {
    let s = SlabEquilibrium::new(-1.0, 1.0, "x", "x", [1.0, 0.0]).unwrap();
    assert!(singular_kernel(&s, 0.0, Complex64::default(), Complex64::new(1.0, 0.0)).is_err());
}

#[test]
fn regularized_solve_converges_off_centre() {
    let s = SlabEquilibrium::new(-1.0, 2.0, "x - 0.4", "1.5", [1.0, 0.7]).unwrap();
    let xr = find_resonant_surface(&s, 301).roots[0];
    assert!((xr + 0.65).abs() < 1e-13);
    let k = singular_kernel(&s, xr, Complex64::default(), Complex64::new(0.5, 0.5)).unwrap();
    let t = tearing_equilibrium(&s, &k, 0.6, 1.0, 65).unwrap();
    // Asymmetric walls put 256 nodes in the pre-asymptotic range.
    let errs: Vec<f64> = [512, 1024, 2048]
        .iter()
        .map(|&n| regularized_comparison(&t.solution, n).unwrap().mismatch_outside)
        .collect();
    assert!(errs[1] < 1e-4, "{errs:?}");
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "{errs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn beltrami_matches_lattice(target in 0.6f64..3.4, negative in prop::bool::ANY) {
        let g = Grid3D::cube_2pi(16).unwrap();
        let mu = if negative { -target } else { target };
        let s = solve_beltrami(&g, mu).unwrap();
        let shells = shells_oracle([TAU; 3], 5, 12);
        let nearest = shells
            .iter()
            .cloned()
            .fold(f64::INFINITY, |b, k| if (k - target).abs() < (b - target).abs() { k } else { b });
        prop_assert!((s.mu.abs() - nearest).abs() < 1e-14);
        prop_assert_eq!(s.mu.signum(), mu.signum());
        prop_assert!(s.residual < 1e-12);
        prop_assert!(divergence_norm(&s.field) < 1e-12);
    }

    #[test]
    fn tearing_jump_and_interior(
        ky in 0.3f64..2.0,
        kz in -1.0f64..1.0,
        mu2 in 0.0f64..0.9,
        mu4 in -2.0f64..2.0,
        re in -1.0f64..1.0,
        im in -1.0f64..1.0,
    ) {
        prop_assume!(re.abs() + im.abs() > 0.1 && mu4.abs() > 0.05);
        let s = SlabEquilibrium::new(-1.0, 1.0, "tanh(x/0.5)", "1", [ky, kz]).unwrap();
        let roots = find_resonant_surface(&s, 201).roots;
        prop_assume!(roots.len() == 1 && roots[0].abs() < 0.8);
        let k = singular_kernel(&s, roots[0], Complex64::default(), Complex64::new(re, im)).unwrap();
        let t = tearing_equilibrium(&s, &k, mu2, mu4, 33).unwrap();
        prop_assert!(t.jump.relative_mismatch < 1e-6, "{:?}", t.jump);
        prop_assert!(t.interior_residual < 1e-8);
    }
}

use std::f64::consts::TAU;

use mockfield::homology::{
    flux_through_cut, harmonic_dimension, harmonic_winding_pairing, harmonic_winding_pairing_at,
    hodge_decompose, ChannelField,
};
use proptest::prelude::*;

/// Admissible field from a random stream function: a wall-vanishing bump
/// times x-modes, plus an x-independent shear profile and a uniform stream.
fn random_channel(modes: &[(f64, f64)], shear: f64, mean: f64) -> ChannelField {
    let lx = 3.0;
    let modes = modes.to_vec();
    ChannelField::from_stream_function(
        64,
        33,
        lx,
        move |x, y| {
            let w = (y * (1.0 - y)).powi(2);
            let s: f64 = modes
                .iter()
                .enumerate()
                .map(|(m, (a, b))| {
                    let k = TAU * (m + 1) as f64 / lx;
                    a * (k * x).cos() + b * (k * x).sin()
                })
                .sum();
            w * s + shear * y * y * (3.0 - 2.0 * y)
        },
        mean,
    )
    .unwrap()
}

#[test]
fn decomposition_is_idempotent() {
    let u = random_channel(&[(0.3, -0.2), (0.1, 0.5)], 0.4, 1.1);
    let (h, s) = hodge_decompose(&u).unwrap();
    let (h2, s2) = hodge_decompose(&s).unwrap();
    assert!(h2.max_abs() < 1e-13);
    assert!(s2.sub(&s).unwrap().max_abs() < 1e-13);
    let (h3, s3) = hodge_decompose(&h).unwrap();
    assert!(h3.sub(&h).unwrap().max_abs() < 1e-13);
    assert!(s3.max_abs() < 1e-13);
}

#[test]
fn harmonic_space_has_channel_genus() {
    assert_eq!(harmonic_dimension(8, 9, 3.0).unwrap(), 1);
    assert_eq!(harmonic_dimension(10, 7, TAU).unwrap(), 1);
}

#[test]
fn uniform_stream_is_its_own_harmonic_part() {
    let u = ChannelField::from_fn(32, 17, 2.0, |_, _| [-0.75, 0.0]).unwrap();
    let (h, s) = hodge_decompose(&u).unwrap();
    assert!(h.sub(&u).unwrap().max_abs() < 1e-15);
    assert!(s.max_abs() < 1e-15);
    assert!((harmonic_winding_pairing(&u) + 0.75).abs() < 1e-14);
}

#[test]
fn zero_x_average_has_no_harmonic_part() {
    let u = random_channel(&[(1.0, 0.0), (0.0, -0.6), (0.2, 0.2)], 0.0, 0.0);
    let (h, _) = hodge_decompose(&u).unwrap();
    assert!(h.max_abs() < 1e-13);
    assert!(harmonic_winding_pairing(&u).abs() < 1e-13);
}

#[test]
fn shear_profile_flux_closed_form() {
    // psi = y^2 (3 - 2y) rises from 0 to 1 across the channel.
    let u = random_channel(&[], 1.0, 0.0);
    for x in [0.0, 0.77, 2.5] {
        assert!((flux_through_cut(&u, x) - 1.0).abs() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_admissible_fields(
        modes in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..5),
        shear in -1.0f64..1.0,
        mean in -2.0f64..2.0,
        cuts in prop::collection::vec(0.0f64..3.0, 16),
    ) {
        let u = random_channel(&modes, shear, mean);
        prop_assert!(u.check_admissible().is_ok());
        let (h, s) = hodge_decompose(&u).unwrap();
        let scale = u.norm_sq().max(1.0);
        prop_assert!(h.inner(&s).unwrap().abs() < 1e-12 * scale);
        prop_assert!(h.add(&s).unwrap().sub(&u).unwrap().max_abs() < 1e-14 * u.max_abs().max(1.0));

        let expect = mean + shear;
        let fluxes: Vec<f64> = cuts.iter().map(|&x| flux_through_cut(&u, x)).collect();
        let lo = fluxes.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fluxes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(hi - lo < 1e-10);
        prop_assert!((fluxes[0] - expect).abs() < 1e-12);
        for &x in &cuts[..4] {
            prop_assert!((harmonic_winding_pairing_at(&u, x) - flux_through_cut(&u, x)).abs() < 1e-12);
        }
        for &x in &cuts[..4] {
            prop_assert!(flux_through_cut(&s, x).abs() < 1e-12);
        }
    }
}

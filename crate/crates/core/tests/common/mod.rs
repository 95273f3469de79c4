#![allow(dead_code)]

use std::f64::consts::TAU;

use mockfield::spectral2d::random_smooth;
use mockfield::ScalarField2D;

/// Seeded random field on the `[0, 2pi)^2` torus rescaled to a given RMS.
pub fn random_rms(n: usize, kmax: u32, rms: f64, seed: u64) -> ScalarField2D {
    let f = random_smooth(n, n, TAU, TAU, kmax, seed).unwrap();
    let now = f.norm_l2() / TAU;
    f.scale(rms / now)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
}

pub fn field(n: usize, f: impl Fn(f64, f64) -> f64) -> ScalarField2D {
    ScalarField2D::from_fn_2pi(n, f).unwrap()
}

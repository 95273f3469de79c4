//! Fixed inputs shared by the benchmarks.

use std::f64::consts::TAU;

use mockfield::filaments::MarkerLoop;
use mockfield::findim::PoissonMatrixModel;
use mockfield::homology::ChannelField;
use mockfield::spectral2d::random_smooth;
use mockfield::{HierarchyState, ScalarField2D};

pub fn random_field(n: usize, seed: u64) -> ScalarField2D {
    random_smooth(n, n, TAU, TAU, 6, seed).unwrap()
}

pub fn mock_field_state(n: usize) -> HierarchyState {
    let small = |s| random_field(n, s).scale(0.2);
    HierarchyState::system_iii(random_field(n, 1), small(2), small(3)).unwrap()
}

/// Unit circles through each other's centres.
pub fn hopf_pair(markers: usize) -> (MarkerLoop, MarkerLoop) {
    (
        MarkerLoop::circle([0.0; 3], 1.0, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], markers).unwrap(),
        MarkerLoop::circle([0.0, 1.0, 0.0], 1.0, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], markers).unwrap(),
    )
}

pub fn channel(nx: usize, ny: usize) -> ChannelField {
    ChannelField::from_stream_function(
        nx,
        ny,
        3.0,
        |x, y| (y * (1.0 - y)).powi(2) * (TAU * x / 3.0).cos() + y * y * (3.0 - 2.0 * y),
        0.5,
    )
    .unwrap()
}

pub fn rigid_body() -> PoissonMatrixModel {
    PoissonMatrixModel::new(
        &["m1", "m2", "m3"],
        &[&["0", "m3", "-m2"], &["-m3", "0", "m1"], &["m2", "-m1", "0"]],
        "m1^2/2 + m2^2/3 + m3^2/5",
        &["(m1^2 + m2^2 + m3^2)/2"],
    )
    .unwrap()
}

//! Default verification thresholds. Front ends may scale them uniformly.

/// Relative drift allowed for energies over a conservation run.
pub const ENERGY_DRIFT: f64 = 1e-6;
/// Relative drift allowed for the enstrophy-type invariant of system I.
pub const VORTICITY_CASIMIR_DRIFT: f64 = 1e-6;
/// Relative drift allowed for the remaining Casimirs and symmetry invariants.
pub const CASIMIR_DRIFT: f64 = 1e-5;

/// Zero-mean flag threshold, relative to `max(1, max|f|)`.
pub const ZERO_MEAN: f64 = 1e-13;
/// RMS divergence accepted as solenoidal.
pub const SOLENOIDAL: f64 = 1e-10;
/// Largest accepted Beltrami residual `|curl B - mu B| / |B|`.
pub const BELTRAMI_RESIDUAL: f64 = 1e-12;
/// Resonance refinement target for `|k . B(x_r)|`.
pub const RESONANCE: f64 = 1e-13;
/// Relative mismatch allowed for sheet jump conditions.
pub const JUMP_MISMATCH: f64 = 1e-6;
/// Weak-form residual allowed away from a current sheet.
pub const INTERIOR_RESIDUAL: f64 = 1e-8;
/// Agreement required between the sheet solver and the regularized solver.
pub const REGULARIZED_AGREEMENT: f64 = 1e-4;
/// Loop-to-loop separation required by the Gauss integral, in segment lengths.
pub const LINK_SEPARATION: f64 = 10.0;
/// Distance of a Gauss linking integral from the nearest integer.
pub const LINKING_INTEGRALITY: f64 = 1e-3;
/// Circulation drift allowed along an advected loop.
pub const CIRCULATION_DRIFT: f64 = 1e-4;
/// Drift allowed for a point-sampled flux function.
pub const POINT_SAMPLE_DRIFT: f64 = 1e-5;
/// Hodge orthogonality, relative to `|u|^2`.
pub const HODGE_ORTHOGONALITY: f64 = 1e-12;
/// Allowed variation of flux between cuts.
pub const FLUX_INDEPENDENCE: f64 = 1e-10;
/// Mismatch between the winding-form pairing and the cut flux.
pub const WINDING_PAIRING: f64 = 1e-12;
/// Jacobi identity residual for polynomial Poisson matrices.
pub const JACOBI: f64 = 1e-14;
/// Relative singular-value threshold defining a numerical kernel.
pub const KERNEL_SVD: f64 = 1e-10;

//! Noncanonical Hamiltonian hierarchies with mock fields: 2D vortex and
//! reduced-MHD dynamics, Casimir diagnostics, filament circulation and
//! linking, energy-Casimir equilibria, Hodge splitting on a channel, and
//! finite-dimensional Poisson models.

pub mod equilibria;
pub mod error;
pub mod expr;
pub mod field3d;
pub mod filaments;
pub mod findim;
pub mod hierarchy;
pub mod homology;
pub mod invariants;
pub mod io;
pub mod spectral2d;
pub mod tolerances;

pub use error::{Error, Result};
pub use hierarchy::{Hamiltonian2D, HierarchyState, SystemTag};
pub use invariants::{Invariant, InvariantSeries, WeightFunction};
pub use spectral2d::ScalarField2D;

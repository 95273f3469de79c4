use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field has nonzero mean {mean:e}; periodic Laplacian inversion is undefined")]
    NonzeroMean { mean: f64 },

    #[error("invariant {which} is not defined for system {tag}")]
    InapplicableInvariant { which: String, tag: String },

    #[error("Hamiltonian references the mock field: {0}")]
    MockFieldInHamiltonian(String),

    #[error("non-finite value encountered at t = {time}: {what}")]
    NonFinite { time: f64, what: String },

    #[error("field is not solenoidal: divergence norm {norm:e}")]
    NotSolenoidal { norm: f64 },

    #[error("field violates the wall condition: max |normal component| = {max:e}")]
    WallViolation { max: f64 },

    #[error("loops are too close for the Gauss integral: min distance {min_distance:e}, max segment {max_segment:e}")]
    LoopsTooClose { min_distance: f64, max_segment: f64 },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("velocity undefined at ({x}, {y}, {z})")]
    VelocityUndefined { x: f64, y: f64, z: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

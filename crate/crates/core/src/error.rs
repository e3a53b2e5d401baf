use thiserror::Error;

/// Errors raised while building meshes, generating adapted meshes or advancing a scenario.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mesh tangled: cell ({i}, {j}) has volume {volume:e}")]
    Tangled { i: usize, j: usize, volume: f64 },

    #[error("boundary vertex ({i}, {j}) left the domain boundary")]
    BoundaryConstraint { i: usize, j: usize },

    #[error("mesh shape mismatch: expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("mesh Courant condition violated in cell ({i}, {j}): inward Courant number {courant}")]
    Courant { i: usize, j: usize, courant: f64 },

    #[error("volume adjustment became non-positive in cell ({i}, {j}): {value:e}")]
    NonPositiveAdjustment { i: usize, j: usize, value: f64 },

    #[error("linear solver did not converge: residual {residual:e} after {iterations} iterations")]
    SolverNonConvergence { residual: f64, iterations: usize },

    #[error("non positive definite face tensor at face {face}")]
    IndefiniteTensor { face: usize },

    #[error("Monge-Ampere iteration diverged: residual grew from {previous:e} to {current:e}")]
    Divergence { previous: f64, current: f64 },

    #[error("zero reference norm in error measurement")]
    ZeroNorm,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

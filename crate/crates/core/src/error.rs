use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    #[error("unsupported polynomial degree {0} (expected 1, 2 or 3)")]
    InvalidDegree(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("velocity axis [{min}, {max}] is not symmetric about zero")]
    AsymmetricVelocityAxis { min: f64, max: f64 },

    #[error("negative viscosity {value} at node {node} on axis {axis}")]
    NegativeViscosity { axis: usize, node: usize, value: f64 },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("right-hand side is incompatible with the constraint (weighted mean {mean:.3e})")]
    IncompatibleRhs { mean: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("advection field vanishes everywhere; no CFL step size")]
    ZeroField,

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("non-finite value in solution at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

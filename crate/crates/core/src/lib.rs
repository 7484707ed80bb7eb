//! Continuous finite element solver for the 1D1V Vlasov–Poisson system and
//! the planar guiding-center model, stabilized by an anisotropic
//! residual-based artificial viscosity and advanced with a five-stage,
//! fourth-order SSP Runge–Kutta method.

pub mod config;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod fem;
pub mod integrator;
pub mod linsolve;
pub mod mesh;
pub mod output;
pub mod poisson;
pub mod reduction;
pub mod scenarios;
pub mod stabilization;

pub use error::{Error, Result};
pub use mesh::{build_mesh, AxisSpec, NodePatch, TensorMesh};

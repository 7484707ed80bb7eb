//! Mean-zero periodic Poisson problem `−ΔΦ = ρ − ρ₀` on the physical mesh and
//! recovery of the nodal electric field `E = −∇Φ`.

use crate::error::{Error, Result};
use crate::fem::{AdvectionField, CsrMatrix, Discretization, FastDiagonalization};
use crate::linsolve::{saddle_solve_preconditioned, SolveOptions};
use crate::mesh::TensorMesh;

#[derive(Debug, Clone, PartialEq)]
pub struct ElectrostaticState {
    pub rho: Vec<f64>,
    pub rho0: f64,
    pub phi: Vec<f64>,
    /// One nodal field per physical axis.
    pub efield: Vec<Vec<f64>>,
    /// Lagrange multiplier of the mean-zero constraint.
    pub multiplier: f64,
}

/// `ρ₀ = ∫ρ / |Ω_x|` using the exact (lumped) node weights.
pub fn compute_rho0(rho: &[f64], mesh_x: &TensorMesh) -> Result<f64> {
    Ok(PoissonSolver::new(mesh_x)?.rho0(rho))
}

/// One-shot solve on a periodic physical mesh.
pub fn solve_fields(rho: &[f64], mesh_x: &TensorMesh) -> Result<ElectrostaticState> {
    PoissonSolver::new(mesh_x)?.solve(rho)
}

/// Reusable operators for repeated Poisson solves on one mesh.
#[derive(Debug, Clone)]
pub struct PoissonSolver {
    disc: Discretization,
    stiffness: CsrMatrix,
    precond: FastDiagonalization,
    gradient: Vec<CsrMatrix>,
    opts: SolveOptions,
}

impl PoissonSolver {
    pub fn new(mesh_x: &TensorMesh) -> Result<Self> {
        if mesh_x.axes().iter().any(|a| !a.periodic) {
            return Err(Error::InvalidAxis("Poisson solve needs periodic axes".into()));
        }
        let disc = Discretization::new(mesh_x)?;
        let d = mesh_x.dim();
        let stiffness = disc.assembler().constant_operator(0.0, &vec![1.0; d]);
        let ops = disc.axis_ops();
        let precond = FastDiagonalization::new(&ops.mass, &ops.stiffness, 0.0, &vec![1.0; d])?;
        let gradient = (0..d)
            .map(|ax| {
                let mut unit = vec![0.0; d];
                unit[ax] = 1.0;
                disc.assembler().advection(&AdvectionField::constant(&unit))
            })
            .collect();
        Ok(Self {
            disc,
            stiffness,
            precond,
            gradient,
            opts: SolveOptions {
                tol: 1e-12,
                max_iter: 20_000,
            },
        })
    }

    pub fn with_options(mut self, opts: SolveOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn mesh(&self) -> &TensorMesh {
        self.disc.mesh()
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn rho0(&self, rho: &[f64]) -> f64 {
        self.disc.integrate(rho) / self.mesh().volume()
    }

    /// Solves for `Φ` with right side `ρ − ρ₀` and recovers `E` by L² projection.
    pub fn solve(&self, rho: &[f64]) -> Result<ElectrostaticState> {
        let n = self.mesh().n_nodes();
        if rho.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rho.len(),
            });
        }
        let rho0 = self.rho0(rho);
        let mut rhs = vec![0.0; n];
        self.disc.apply_mass(rho, &mut rhs);
        let scale: f64 = rhs.iter().map(|r| r.abs()).sum();
        for (r, w) in rhs.iter_mut().zip(self.disc.lumped_mass()) {
            *r -= rho0 * w;
        }
        let (phi, multiplier) = saddle_solve_preconditioned(
            &self.stiffness,
            &self.precond,
            self.disc.lumped_mass(),
            &rhs,
            scale,
            self.opts,
        )?;
        let efield = self.gradient_field(&phi);
        Ok(ElectrostaticState {
            rho: rho.to_vec(),
            rho0,
            phi,
            efield,
            multiplier,
        })
    }

    /// L² projection of `−∇Φ` onto the nodal space, one component per axis.
    pub fn gradient_field(&self, phi: &[f64]) -> Vec<Vec<f64>> {
        self.gradient
            .iter()
            .map(|g| {
                let mut e = g.mul_vec(phi);
                e.iter_mut().for_each(|v| *v = -*v);
                self.disc.solve_mass(&mut e);
                e
            })
            .collect()
    }

    /// `∫ |E|²` with exact quadrature of the nodal field.
    pub fn field_energy(&self, efield: &[Vec<f64>]) -> f64 {
        efield.iter().map(|e| self.disc.inner(e, e)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, AxisSpec};
    use std::f64::consts::PI;

    #[test]
    fn constant_density_has_no_field() {
        let mesh = build_mesh(&[AxisSpec::periodic(0.0, 4.0 * PI, 16)], 2).unwrap();
        let st = solve_fields(&vec![3.0; mesh.n_nodes()], &mesh).unwrap();
        assert!((st.rho0 - 3.0).abs() < 1e-14);
        assert!(st.phi.iter().all(|p| p.abs() < 1e-14));
        assert!(st.efield[0].iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn cosine_density_recovers_cosine_potential() {
        let mesh = build_mesh(&[AxisSpec::periodic(0.0, 2.0 * PI, 32)], 3).unwrap();
        let xs = mesh.axis_coordinates(0);
        let rho: Vec<f64> = xs.iter().map(|x| 1.0 + x.cos()).collect();
        let st = solve_fields(&rho, &mesh).unwrap();
        assert!((st.rho0 - 1.0).abs() < 1e-13);
        for (i, x) in xs.iter().enumerate() {
            assert!((st.phi[i] - x.cos()).abs() < 1e-6);
            assert!((st.efield[0][i] - x.sin()).abs() < 1e-4);
        }
        assert!(st.multiplier.abs() < 1e-12);
    }

    #[test]
    fn rejects_non_periodic_mesh() {
        let mesh = build_mesh(&[AxisSpec::new(0.0, 1.0, 4, false)], 1).unwrap();
        assert!(PoissonSolver::new(&mesh).is_err());
    }
}

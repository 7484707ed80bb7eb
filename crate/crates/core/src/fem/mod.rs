//! Finite element building blocks: reference elements, sparse storage,
//! assembly and tensor-product operator structure.

pub mod assembly;
pub mod kron;
pub mod reference;
pub mod sparse;

pub use assembly::{
    assemble_advection, assemble_diffusion, assemble_mass, lump_mass, AdvectionField, Assembler,
    Component,
};
pub use kron::{AdvectionOperator, AxisOperators, FastDiagonalization, KroneckerOperator, KroneckerSolver};
pub use reference::{gauss_legendre, ElementTables, ReferenceElement};
pub use sparse::{CsrMatrix, SparsityPattern};

use crate::error::Result;
use crate::mesh::TensorMesh;

/// Everything needed to apply and invert the mass matrix on one mesh,
/// together with the generic assembler.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: TensorMesh,
    assembler: Assembler,
    axis_ops: AxisOperators,
    mass_op: KroneckerOperator,
    mass_solver: KroneckerSolver,
    lumped: Vec<f64>,
}

impl Discretization {
    pub fn new(mesh: &TensorMesh) -> Result<Self> {
        let assembler = Assembler::new(mesh);
        let axis_ops = AxisOperators::new(mesh)?;
        let mass_solver = axis_ops.mass_solver()?;
        let axis_lumped: Vec<Vec<f64>> = axis_ops.mass.iter().map(|m| m.row_sums()).collect();
        let lumped = (0..mesh.n_nodes())
            .map(|l| {
                let m = mesh.node_multi_index(l);
                (0..mesh.dim()).map(|ax| axis_lumped[ax][m[ax]]).product()
            })
            .collect();
        Ok(Self {
            mesh: mesh.clone(),
            assembler,
            mass_op: axis_ops.mass_operator(),
            axis_ops,
            mass_solver,
            lumped,
        })
    }

    pub fn mesh(&self) -> &TensorMesh {
        &self.mesh
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn axis_ops(&self) -> &AxisOperators {
        &self.axis_ops
    }

    /// Lumped mass weights `m_i = ∫ ψ_i`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// `y = M x` with the consistent mass matrix.
    pub fn apply_mass(&self, x: &[f64], y: &mut [f64]) {
        self.mass_op.apply(x, y);
    }

    /// Overwrites `b` with `M^{-1} b`.
    pub fn solve_mass(&self, b: &mut [f64]) {
        self.mass_solver.solve(b);
    }

    /// `∫ f` of a nodal field.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.lumped.iter().zip(f).map(|(m, v)| m * v).sum()
    }

    /// `(a, b)_{L²}` of two nodal fields.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut mb = vec![0.0; b.len()];
        self.apply_mass(b, &mut mb);
        a.iter().zip(&mb).map(|(x, y)| x * y).sum()
    }

    pub fn advection_operator(&self, field: &AdvectionField) -> AdvectionOperator {
        AdvectionOperator::build(&self.axis_ops, &self.assembler, field)
    }
}

/// Value of the finite element function at a point, clamped to the mesh box.
pub fn evaluate_at(mesh: &TensorMesh, field: &[f64], point: &[f64]) -> f64 {
    let el = ReferenceElement::with_quadrature(mesh.degree(), 1);
    let epa = mesh.elements_per_axis();
    let mut e = 0;
    let mut basis = Vec::with_capacity(mesh.dim());
    for (ax, &x) in point.iter().enumerate().take(mesh.dim()) {
        let a = mesh.axis(ax);
        let s = ((x - a.min) / a.spacing()).clamp(0.0, a.elements as f64);
        let idx = (s.floor() as usize).min(a.elements - 1);
        e = e * epa[ax] + idx;
        basis.push(el.eval_all(s - idx as f64));
    }
    mesh.element_dofs(e)
        .iter()
        .enumerate()
        .map(|(a, &g)| {
            let m = mesh.local_multi_index(a);
            let w: f64 = (0..mesh.dim()).map(|ax| basis[ax][m[ax]]).product();
            w * field[g]
        })
        .sum()
}

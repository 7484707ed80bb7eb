//! Element-by-element assembly of mass, advection and diffusion operators.

use std::sync::Arc;

use super::reference::{ElementTables, ReferenceElement};
use super::sparse::{CsrMatrix, SparsityPattern};
use crate::error::{Error, Result};
use crate::mesh::TensorMesh;
use crate::stabilization::ViscosityField;

/// One Cartesian component of a transport field.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Zero,
    Constant(f64),
    /// The coordinate along a mesh axis, evaluated analytically.
    Coordinate(usize),
    /// A nodal field over the sub-mesh spanned by `axes`, constant along the others.
    Nodal { axes: Vec<usize>, values: Vec<f64> },
}

impl Component {
    /// Mesh axes this component varies along.
    pub fn depends_on(&self) -> Vec<usize> {
        match self {
            Component::Zero | Component::Constant(_) => Vec::new(),
            Component::Coordinate(ax) => vec![*ax],
            Component::Nodal { axes, .. } => axes.clone(),
        }
    }

    fn sub_strides(mesh: &TensorMesh, axes: &[usize]) -> Vec<usize> {
        let mut s = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * mesh.nodes_per_axis()[axes[i + 1]];
        }
        s
    }

    pub fn validate(&self, mesh: &TensorMesh) -> Result<()> {
        match self {
            Component::Coordinate(ax) if *ax >= mesh.dim() => {
                Err(Error::InvalidAxis(format!("coordinate axis {ax} out of range")))
            }
            Component::Nodal { axes, values } => {
                if axes.iter().any(|&a| a >= mesh.dim()) {
                    return Err(Error::InvalidAxis("nodal component axis out of range".into()));
                }
                let expected: usize = axes.iter().map(|&a| mesh.nodes_per_axis()[a]).product();
                if values.len() != expected {
                    return Err(Error::DimensionMismatch {
                        expected,
                        got: values.len(),
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Element-local nodal values (coordinates are taken unwrapped).
    pub fn gather(&self, mesh: &TensorMesh, e: usize, out: &mut [f64]) {
        match self {
            Component::Zero => out.fill(0.0),
            Component::Constant(c) => out.fill(*c),
            Component::Coordinate(ax) => {
                let origin = mesh.element_origin(e)[*ax];
                let s = mesh.node_spacing(*ax);
                for (a, o) in out.iter_mut().enumerate() {
                    *o = origin + mesh.local_multi_index(a)[*ax] as f64 * s;
                }
            }
            Component::Nodal { axes, values } => {
                if axes.len() == mesh.dim() && axes.iter().enumerate().all(|(i, &a)| i == a) {
                    for (o, &g) in out.iter_mut().zip(mesh.element_dofs(e)) {
                        *o = values[g];
                    }
                    return;
                }
                let strides = Self::sub_strides(mesh, axes);
                let em = mesh.element_multi_index(e);
                let k = mesh.degree();
                for (a, o) in out.iter_mut().enumerate() {
                    let lm = mesh.local_multi_index(a);
                    let mut idx = 0;
                    for (s, &ax) in axes.iter().enumerate() {
                        let n = mesh.nodes_per_axis()[ax];
                        let mut i = em[ax] * k + lm[ax];
                        if mesh.axis(ax).periodic {
                            i %= n;
                        }
                        idx += i * strides[s];
                    }
                    *o = values[idx];
                }
            }
        }
    }

    /// Value of the component at every mesh node.
    pub fn node_values(&self, mesh: &TensorMesh) -> Vec<f64> {
        let n = mesh.n_nodes();
        match self {
            Component::Zero => vec![0.0; n],
            Component::Constant(c) => vec![*c; n],
            Component::Coordinate(ax) => (0..n)
                .map(|l| mesh.coordinate(*ax, mesh.node_multi_index(l)[*ax]))
                .collect(),
            Component::Nodal { axes, values } => {
                let strides = Self::sub_strides(mesh, axes);
                (0..n)
                    .map(|l| {
                        let m = mesh.node_multi_index(l);
                        let idx: usize = axes.iter().enumerate().map(|(s, &ax)| m[ax] * strides[s]).sum();
                        values[idx]
                    })
                    .collect()
            }
        }
    }
}

/// Transport field `β` with one component per mesh axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvectionField {
    pub components: Vec<Component>,
}

impl AdvectionField {
    pub fn new(components: Vec<Component>) -> Self {
        Self { components }
    }

    pub fn constant(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&c| Component::Constant(c)).collect())
    }

    /// `β = (v, E(x))` on a phase-space mesh; `efield` holds one nodal
    /// field over `Ω_x` per physical axis.
    pub fn vlasov(mesh: &TensorMesh, efield: &[Vec<f64>]) -> Self {
        let d = mesh.physical_dims();
        let mut comps: Vec<Component> = (0..d).map(|j| Component::Coordinate(d + j)).collect();
        for e in efield.iter().take(mesh.velocity_dims()) {
            comps.push(Component::Nodal {
                axes: (0..d).collect(),
                values: e.clone(),
            });
        }
        Self::new(comps)
    }

    /// `β = E^⊥ = (E_2, -E_1)` for the planar guiding-center model.
    pub fn guiding_center(efield: &[Vec<f64>]) -> Self {
        Self::new(vec![
            Component::Nodal {
                axes: vec![0, 1],
                values: efield[1].clone(),
            },
            Component::Nodal {
                axes: vec![0, 1],
                values: efield[0].iter().map(|e| -e).collect(),
            },
        ])
    }

    pub fn validate(&self, mesh: &TensorMesh) -> Result<()> {
        if self.components.len() != mesh.dim() {
            return Err(Error::DimensionMismatch {
                expected: mesh.dim(),
                got: self.components.len(),
            });
        }
        self.components.iter().try_for_each(|c| c.validate(mesh))
    }

    pub fn node_values(&self, mesh: &TensorMesh) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.node_values(mesh)).collect()
    }

    /// `max_i |β(x_i)|` (Euclidean norm at nodes).
    pub fn max_norm(&self, mesh: &TensorMesh) -> f64 {
        let vals = self.node_values(mesh);
        (0..mesh.n_nodes())
            .map(|l| vals.iter().map(|c| c[l] * c[l]).sum::<f64>())
            .fold(0.0f64, f64::max)
            .sqrt()
    }
}

/// Cached element tables, sparsity pattern and scatter map for one mesh.
#[derive(Debug, Clone)]
pub struct Assembler {
    mesh: TensorMesh,
    reference: ReferenceElement,
    tables: ElementTables,
    pattern: Arc<SparsityPattern>,
    scatter: Vec<u32>,
}

impl Assembler {
    pub fn new(mesh: &TensorMesh) -> Self {
        Self::with_quadrature(mesh, mesh.degree() + 2)
    }

    pub fn with_quadrature(mesh: &TensorMesh, points: usize) -> Self {
        let reference = ReferenceElement::with_quadrature(mesh.degree(), points);
        let tables = ElementTables::new(mesh, &reference);
        let rows: Vec<Vec<usize>> = (0..mesh.n_nodes())
            .map(|i| mesh.node_patch(i).members)
            .collect();
        let pattern = Arc::new(SparsityPattern::from_rows(mesh.n_nodes(), rows));
        let n_local = mesh.n_local();
        let mut scatter = Vec::with_capacity(mesh.n_elements() * n_local * n_local);
        for e in 0..mesh.n_elements() {
            let dofs = mesh.element_dofs(e);
            for &gi in dofs {
                for &gj in dofs {
                    let p = pattern
                        .position(gi, gj)
                        .expect("element couplings lie inside node patches");
                    scatter.push(p as u32);
                }
            }
        }
        Self {
            mesh: mesh.clone(),
            reference,
            tables,
            pattern,
            scatter,
        }
    }

    pub fn mesh(&self) -> &TensorMesh {
        &self.mesh
    }

    pub fn tables(&self) -> &ElementTables {
        &self.tables
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn zeros(&self) -> CsrMatrix {
        CsrMatrix::zeros(self.pattern.clone())
    }

    fn assemble_into<F>(&self, out: &mut CsrMatrix, mut local: F)
    where
        F: FnMut(usize, &mut [f64]),
    {
        assert!(Arc::ptr_eq(out.pattern(), &self.pattern) || **out.pattern() == *self.pattern);
        let n2 = self.tables.n_local * self.tables.n_local;
        let mut buf = vec![0.0; n2];
        let values = out.values_mut();
        values.fill(0.0);
        for e in 0..self.mesh.n_elements() {
            buf.fill(0.0);
            local(e, &mut buf);
            let map = &self.scatter[e * n2..(e + 1) * n2];
            for (&p, &v) in map.iter().zip(&buf) {
                values[p as usize] += v;
            }
        }
    }

    /// Constant-coefficient operator `c0 (ψ_j, ψ_i) + Σ_ax c_ax (∂ψ_j, ∂ψ_i)`.
    pub fn constant_operator(&self, mass_coeff: f64, diffusion: &[f64]) -> CsrMatrix {
        let t = &self.tables;
        let n = t.n_local;
        let d = t.dim;
        let mut reference = vec![0.0; n * n];
        for q in 0..t.n_qp {
            let w = t.weights[q];
            let psi = t.psi_row(q);
            let g = t.grad_row(q);
            for i in 0..n {
                for j in 0..n {
                    let mut v = mass_coeff * psi[i] * psi[j];
                    for ax in 0..d {
                        v += diffusion.get(ax).copied().unwrap_or(0.0) * g[i * d + ax] * g[j * d + ax];
                    }
                    reference[i * n + j] += w * v;
                }
            }
        }
        let mut out = self.zeros();
        self.assemble_into(&mut out, |_, buf| buf.copy_from_slice(&reference));
        out
    }

    pub fn mass(&self) -> CsrMatrix {
        self.constant_operator(1.0, &[])
    }

    /// `(g ψ_j, ψ_i)` for a weight component `g`.
    pub fn weighted_mass(&self, weight: &Component) -> CsrMatrix {
        let t = &self.tables;
        let n = t.n_local;
        let mut local_w = vec![0.0; n];
        let mut out = self.zeros();
        self.assemble_into(&mut out, |e, buf| {
            weight.gather(&self.mesh, e, &mut local_w);
            for q in 0..t.n_qp {
                let psi = t.psi_row(q);
                let wq = t.weights[q] * t.interpolate(q, &local_w);
                for i in 0..n {
                    let s = wq * psi[i];
                    for j in 0..n {
                        buf[i * n + j] += s * psi[j];
                    }
                }
            }
        });
        out
    }

    /// `c_ij = (β·∇ψ_j, ψ_i)`.
    pub fn advection(&self, field: &AdvectionField) -> CsrMatrix {
        let mut out = self.zeros();
        self.advection_into(field, &mut out);
        out
    }

    pub fn advection_into(&self, field: &AdvectionField, out: &mut CsrMatrix) {
        let t = &self.tables;
        let n = t.n_local;
        let d = t.dim;
        let active: Vec<usize> = (0..d)
            .filter(|&ax| !matches!(field.components[ax], Component::Zero))
            .collect();
        let mut local: Vec<Vec<f64>> = vec![vec![0.0; n]; d];
        let mut s = vec![0.0; n];
        self.assemble_into(out, |e, buf| {
            for &ax in &active {
                field.components[ax].gather(&self.mesh, e, &mut local[ax]);
            }
            for q in 0..t.n_qp {
                let psi = t.psi_row(q);
                let g = t.grad_row(q);
                let w = t.weights[q];
                s.fill(0.0);
                for &ax in &active {
                    let b = w * t.interpolate(q, &local[ax]);
                    for j in 0..n {
                        s[j] += b * g[j * d + ax];
                    }
                }
                for i in 0..n {
                    let p = psi[i];
                    let row = &mut buf[i * n..(i + 1) * n];
                    for j in 0..n {
                        row[j] += p * s[j];
                    }
                }
            }
        });
    }

    /// `d_ij = Σ_ax (ε_ax ∂_ax ψ_j, ∂_ax ψ_i)` with nodal coefficients per axis.
    pub fn diffusion(&self, eps: &[Vec<f64>]) -> Result<CsrMatrix> {
        let mut out = self.zeros();
        self.diffusion_into(eps, &mut out)?;
        Ok(out)
    }

    pub fn diffusion_into(&self, eps: &[Vec<f64>], out: &mut CsrMatrix) -> Result<()> {
        let d = self.tables.dim;
        if eps.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: eps.len(),
            });
        }
        for (ax, field) in eps.iter().enumerate() {
            if field.len() != self.mesh.n_nodes() {
                return Err(Error::DimensionMismatch {
                    expected: self.mesh.n_nodes(),
                    got: field.len(),
                });
            }
            if let Some((node, &value)) = field.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(Error::NegativeViscosity { axis: ax, node, value });
            }
        }
        let t = &self.tables;
        let n = t.n_local;
        let active: Vec<usize> = (0..d).filter(|&ax| eps[ax].iter().any(|&v| v > 0.0)).collect();
        let mut local: Vec<Vec<f64>> = vec![vec![0.0; n]; d];
        let mut gw = vec![0.0; n];
        self.assemble_into(out, |e, buf| {
            let dofs = self.mesh.element_dofs(e);
            let mut any = false;
            for &ax in &active {
                for (l, &g) in local[ax].iter_mut().zip(dofs) {
                    *l = eps[ax][g];
                }
                any |= local[ax].iter().any(|&v| v != 0.0);
            }
            if !any {
                return;
            }
            for q in 0..t.n_qp {
                let g = t.grad_row(q);
                let w = t.weights[q];
                for &ax in &active {
                    let c = w * t.interpolate(q, &local[ax]);
                    if c == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        gw[j] = c * g[j * d + ax];
                    }
                    for i in 0..n {
                        let gi = g[i * d + ax];
                        let row = &mut buf[i * n..(i + 1) * n];
                        for j in 0..n {
                            row[j] += gi * gw[j];
                        }
                    }
                }
            }
        });
        Ok(())
    }

    /// Element-local values of a global nodal field.
    pub fn gather(&self, e: usize, field: &[f64], out: &mut [f64]) {
        for (o, &g) in out.iter_mut().zip(self.mesh.element_dofs(e)) {
            *o = field[g];
        }
    }
}

pub fn assemble_mass(mesh: &TensorMesh) -> CsrMatrix {
    Assembler::new(mesh).mass()
}

pub fn assemble_advection(mesh: &TensorMesh, field: &AdvectionField) -> Result<CsrMatrix> {
    field.validate(mesh)?;
    Ok(Assembler::new(mesh).advection(field))
}

pub fn assemble_diffusion(mesh: &TensorMesh, visc: &ViscosityField) -> Result<CsrMatrix> {
    Assembler::new(mesh).diffusion(visc.axes())
}

/// Lumped masses `m_i = Σ_j m_ij`.
pub fn lump_mass(mass: &CsrMatrix) -> Vec<f64> {
    mass.row_sums()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, AxisSpec};

    fn grid(k: usize, h1: f64, h2: f64, n: usize) -> TensorMesh {
        build_mesh(
            &[
                AxisSpec::periodic(0.0, h1 * n as f64, n),
                AxisSpec::periodic(0.0, h2 * n as f64, n),
            ],
            k,
        )
        .unwrap()
    }

    #[test]
    fn q1_mass_row_sum_and_total() {
        let mesh = grid(1, 0.3, 0.2, 6);
        let m = assemble_mass(&mesh);
        let lumped = lump_mass(&m);
        for &mi in &lumped {
            assert!((mi - 0.06).abs() < 1e-15);
        }
        let total: f64 = m.values().iter().sum();
        assert!((total - mesh.volume()).abs() < 1e-13 * mesh.volume());
        assert!(m.max_asymmetry() < 1e-16);
    }

    #[test]
    fn one_dimensional_q1_element_mass() {
        let mesh = build_mesh(&[AxisSpec::new(0.0, 0.5, 1, false)], 1).unwrap();
        let m = assemble_mass(&mesh);
        let h = 0.5;
        assert!((m.get(0, 0) - h / 3.0).abs() < 1e-15);
        assert!((m.get(0, 1) - h / 6.0).abs() < 1e-15);
        assert!((m.get(1, 1) - h / 3.0).abs() < 1e-15);
    }

    #[test]
    fn q3_lumped_mass_is_three_eighths_rule() {
        let mesh = build_mesh(&[AxisSpec::new(0.0, 0.9, 1, false)], 3).unwrap();
        let lumped = lump_mass(&assemble_mass(&mesh));
        let expect = [1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0];
        for (a, b) in lumped.iter().zip(expect) {
            assert!((a - 0.9 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_exact_under_quadrature_refinement() {
        for k in 1..=3 {
            let mesh = grid(k, 0.4, 0.25, 3);
            let a = Assembler::new(&mesh).mass();
            let b = Assembler::with_quadrature(&mesh, 2 * k + 4).mass();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-14 * y.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn constant_advection_row_is_centered_stencil() {
        let (h1, h2) = (0.5, 0.25);
        let mesh = grid(1, h1, h2, 6);
        let c = assemble_advection(&mesh, &AdvectionField::constant(&[1.0, 0.0])).unwrap();
        let at = |i: usize, j: usize| mesh.node_index(&[i, j]);
        let row = at(3, 3);
        for dj in [2usize, 3, 4] {
            let w = if dj == 3 { 4.0 } else { 1.0 };
            assert!((c.get(row, at(4, dj)) - w * h2 / 12.0).abs() < 1e-15);
            assert!((c.get(row, at(2, dj)) + w * h2 / 12.0).abs() < 1e-15);
            assert!(c.get(row, at(3, dj)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_viscosity_gives_zero_operator() {
        let mesh = grid(2, 0.5, 0.5, 3);
        let visc = ViscosityField::zeros(&mesh);
        let d = assemble_diffusion(&mesh, &visc).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn negative_viscosity_rejected() {
        let mesh = grid(1, 0.5, 0.5, 3);
        let mut visc = ViscosityField::zeros(&mesh);
        visc.axes_mut()[1][4] = -1.0;
        assert!(matches!(
            assemble_diffusion(&mesh, &visc),
            Err(Error::NegativeViscosity { axis: 1, node: 4, .. })
        ));
    }
}

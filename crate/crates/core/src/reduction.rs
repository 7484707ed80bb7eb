//! Velocity reductions of the phase-space distribution: charge density and
//! the moments used by the conservation diagnostics.

use crate::error::{Error, Result};
use crate::fem::kron::apply_along_axis;
use crate::fem::{Assembler, CsrMatrix, ReferenceElement};
use crate::mesh::{build_mesh, TensorMesh};

/// Exact integrals of the 1D Lagrange basis over one unit element, per degree.
pub const CHARGE_WEIGHTS: [&[f64]; 3] = [
    &[1.0 / 2.0, 1.0 / 2.0],
    &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    &[1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0],
];

fn require_phase_space(mesh: &TensorMesh) -> Result<()> {
    if mesh.physical_dims() != 1 || mesh.velocity_dims() != 1 {
        return Err(Error::InvalidAxis(
            "velocity reductions need one position and one velocity axis".into(),
        ));
    }
    Ok(())
}

/// `ρ_i = Σ_j w_j f_{i,j}` accumulated element by element along `v`.
pub fn charge_density(f: &[f64], mesh: &TensorMesh) -> Result<Vec<f64>> {
    require_phase_space(mesh)?;
    if f.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            got: f.len(),
        });
    }
    let k = mesh.degree();
    let [nx, nv] = [mesh.nodes_per_axis()[0], mesh.nodes_per_axis()[1]];
    let vaxis = mesh.axis(1);
    let dv = vaxis.spacing();
    let table = CHARGE_WEIGHTS[k - 1];
    let mut rho = vec![0.0; nx];
    for (i, r) in rho.iter_mut().enumerate() {
        let column = &f[i * nv..(i + 1) * nv];
        let mut acc = 0.0;
        for e in 0..vaxis.elements {
            for (b, &w) in table.iter().enumerate() {
                let mut j = e * k + b;
                if vaxis.periodic {
                    j %= nv;
                }
                acc += w * column[j];
            }
        }
        *r = acc * dv;
    }
    Ok(rho)
}

/// Global velocity weights `w_j = ∫ φ_j dv` as used by [`charge_density`].
pub fn velocity_weights(mesh: &TensorMesh) -> Result<Vec<f64>> {
    require_phase_space(mesh)?;
    let k = mesh.degree();
    let nv = mesh.nodes_per_axis()[1];
    let vaxis = mesh.axis(1);
    let mut w = vec![0.0; nv];
    for e in 0..vaxis.elements {
        for (b, &t) in CHARGE_WEIGHTS[k - 1].iter().enumerate() {
            let mut j = e * k + b;
            if vaxis.periodic {
                j %= nv;
            }
            w[j] += t * vaxis.spacing();
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `∫ f`
    pub mass: f64,
    /// `∫ f v`
    pub momentum: f64,
    /// `½ ∫ f v²`
    pub kinetic_energy: f64,
    /// `∫ f²`
    pub l2norm_sq: f64,
}

/// Precomputed 1D weights for fast moment evaluation on a phase-space mesh.
#[derive(Debug, Clone)]
pub struct MomentWeights {
    shape: Vec<usize>,
    wx: Vec<f64>,
    /// `∫ φ_j v^p dv` for `p = 0, 1, 2`.
    wv: [Vec<f64>; 3],
    mass: [CsrMatrix; 2],
}

impl MomentWeights {
    pub fn new(mesh: &TensorMesh) -> Result<Self> {
        require_phase_space(mesh)?;
        let mx = build_mesh(&[*mesh.axis(0)], mesh.degree())?;
        let mv = build_mesh(&[*mesh.axis(1)], mesh.degree())?;
        let ax = Assembler::new(&mx);
        let av = Assembler::new(&mv);
        let wx = ax.mass().row_sums();
        let wv = [0, 1, 2].map(|p| velocity_moment_weights(&mv, p));
        Ok(Self {
            shape: mesh.nodes_per_axis().to_vec(),
            wx,
            wv,
            mass: [ax.mass(), av.mass()],
        })
    }

    pub fn moments(&self, f: &[f64]) -> Moments {
        let nv = self.shape[1];
        let mut s = [0.0; 3];
        for (i, &wx) in self.wx.iter().enumerate() {
            let col = &f[i * nv..(i + 1) * nv];
            for (p, acc) in s.iter_mut().enumerate() {
                *acc += wx * col.iter().zip(&self.wv[p]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let mut t = vec![0.0; f.len()];
        let mut mf = vec![0.0; f.len()];
        apply_along_axis(&self.mass[0], &self.shape, 0, f, &mut t);
        apply_along_axis(&self.mass[1], &self.shape, 1, &t, &mut mf);
        Moments {
            mass: s[0],
            momentum: s[1],
            kinetic_energy: 0.5 * s[2],
            l2norm_sq: f.iter().zip(&mf).map(|(a, b)| a * b).sum(),
        }
    }
}

fn velocity_moment_weights(mv: &TensorMesh, power: i32) -> Vec<f64> {
    let k = mv.degree();
    let el = ReferenceElement::with_quadrature(k, k + 3);
    let h = mv.element_size(0);
    let mut w = vec![0.0; mv.n_nodes()];
    for e in 0..mv.n_elements() {
        let origin = mv.element_origin(e)[0];
        let dofs = mv.element_dofs(e);
        for (q, (&t, &wq)) in el.points.iter().zip(&el.weights).enumerate() {
            let v = origin + t * h;
            let s = wq * h * v.powi(power);
            for (a, &g) in dofs.iter().enumerate() {
                w[g] += s * el.values[q][a];
            }
        }
    }
    w
}

pub fn moments(f: &[f64], mesh: &TensorMesh) -> Result<Moments> {
    if f.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            got: f.len(),
        });
    }
    Ok(MomentWeights::new(mesh)?.moments(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::AxisSpec;

    #[test]
    fn unit_field_moments() {
        for k in 1..=3 {
            let mesh = TensorMesh::phase_space(
                AxisSpec::periodic(0.0, 1.0, 3),
                AxisSpec::periodic(-1.0, 1.0, 4),
                k,
            )
            .unwrap();
            let m = moments(&vec![1.0; mesh.n_nodes()], &mesh).unwrap();
            assert!((m.mass - 2.0).abs() < 1e-14);
            assert!(m.momentum.abs() < 1e-14);
            assert!((m.kinetic_energy - 1.0 / 3.0).abs() < 1e-14);
            assert!((m.l2norm_sq - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn q1_element_weights_are_halves() {
        let mesh = TensorMesh::phase_space(
            AxisSpec::periodic(0.0, 1.0, 2),
            AxisSpec::new(0.0, 0.5, 1, false),
            1,
        )
        .unwrap();
        // Nodes (i, j) with j in {0, 1}: ρ_i = Δv (f_{i0} + f_{i1}) / 2.
        let f = vec![1.0, 3.0, 2.0, 6.0];
        let rho = charge_density(&f, &mesh).unwrap();
        assert_eq!(rho, vec![0.5 * 2.0, 0.5 * 4.0]);
    }
}

//! Structured tensor-product meshes with degree-k Lagrange node layouts.
//!
//! Nodes are numbered lexicographically with the last axis running fastest,
//! so for a phase-space mesh `(x, v)` the node pairing x-node `i` and v-node
//! `j` has index `i * n_v + j`. Periodic axes identify the last node layer
//! with the first one; no ghost layers are kept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported total dimension of a tensor mesh.
pub const MAX_DIM: usize = 3;

/// Multi-index / point buffer with room for every supported dimension.
pub type Multi<T> = [T; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub elements: usize,
    pub periodic: bool,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, elements: usize, periodic: bool) -> Self {
        Self {
            min,
            max,
            elements,
            periodic,
        }
    }

    pub fn periodic(min: f64, max: f64, elements: usize) -> Self {
        Self::new(min, max, elements, true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements == 0 {
            return Err(Error::InvalidAxis("axis needs at least one element".into()));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.max <= self.min {
            return Err(Error::InvalidAxis(format!(
                "degenerate interval [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    /// Element size `h = (max - min) / elements`.
    pub fn spacing(&self) -> f64 {
        self.length() / self.elements as f64
    }

    /// Number of distinct nodes on this axis for polynomial degree `k`.
    pub fn nodes(&self, degree: usize) -> usize {
        if self.periodic {
            degree * self.elements
        } else {
            degree * self.elements + 1
        }
    }
}

/// Set of nodes lying in the support of one basis function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePatch {
    pub center: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TensorMesh {
    axes: Vec<AxisSpec>,
    degree: usize,
    physical_dims: usize,
    nodes_per_axis: Vec<usize>,
    node_strides: Vec<usize>,
    n_nodes: usize,
    element_strides: Vec<usize>,
    n_elements: usize,
    local_multi: Vec<Multi<usize>>,
    element_dofs: Vec<usize>,
}

/// Builds a mesh whose axes are all physical coordinates.
pub fn build_mesh(axes: &[AxisSpec], degree: usize) -> Result<TensorMesh> {
    TensorMesh::new(axes.to_vec(), degree, axes.len())
}

impl TensorMesh {
    /// `physical_dims` leading axes are position coordinates; the rest are velocities.
    pub fn new(axes: Vec<AxisSpec>, degree: usize, physical_dims: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::InvalidDegree(degree));
        }
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(Error::InvalidAxis(format!(
                "mesh dimension {} outside 1..={MAX_DIM}",
                axes.len()
            )));
        }
        if physical_dims > axes.len() {
            return Err(Error::InvalidAxis(
                "more physical axes than mesh axes".into(),
            ));
        }
        for a in &axes {
            a.validate()?;
        }
        let dim = axes.len();
        let nodes_per_axis: Vec<usize> = axes.iter().map(|a| a.nodes(degree)).collect();
        let node_strides = strides(&nodes_per_axis);
        let n_nodes = nodes_per_axis.iter().product();
        let elements_per_axis: Vec<usize> = axes.iter().map(|a| a.elements).collect();
        let element_strides = strides(&elements_per_axis);
        let n_elements = elements_per_axis.iter().product();

        let per_axis = degree + 1;
        let n_local = per_axis.pow(dim as u32);
        let local_multi: Vec<Multi<usize>> = (0..n_local)
            .map(|a| unflatten(a, &vec![per_axis; dim]))
            .collect();

        let mut element_dofs = Vec::with_capacity(n_elements * n_local);
        for e in 0..n_elements {
            let em = unflatten(e, &elements_per_axis);
            for lm in &local_multi {
                let mut g = 0;
                for ax in 0..dim {
                    let mut idx = em[ax] * degree + lm[ax];
                    if axes[ax].periodic {
                        idx %= nodes_per_axis[ax];
                    }
                    g += idx * node_strides[ax];
                }
                element_dofs.push(g);
            }
        }

        Ok(Self {
            axes,
            degree,
            physical_dims,
            nodes_per_axis,
            node_strides,
            n_nodes,
            element_strides,
            n_elements,
            local_multi,
            element_dofs,
        })
    }

    /// Phase-space mesh over `Ω_x × Ω_v` with one position and one velocity axis.
    pub fn phase_space(x: AxisSpec, v: AxisSpec, degree: usize) -> Result<Self> {
        Self::new(vec![x, v], degree, 1)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn physical_dims(&self) -> usize {
        self.physical_dims
    }

    pub fn velocity_dims(&self) -> usize {
        self.dim() - self.physical_dims
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn axis(&self, ax: usize) -> &AxisSpec {
        &self.axes[ax]
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes_per_axis
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn elements_per_axis(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.elements).collect()
    }

    /// Local dofs per element, `(k+1)^d`.
    pub fn n_local(&self) -> usize {
        self.local_multi.len()
    }

    pub fn local_multi_index(&self, a: usize) -> &Multi<usize> {
        &self.local_multi[a]
    }

    /// Element size along an axis.
    pub fn element_size(&self, ax: usize) -> f64 {
        self.axes[ax].spacing()
    }

    /// Distance between neighbouring nodes along an axis, `h / k`.
    pub fn node_spacing(&self, ax: usize) -> f64 {
        self.axes[ax].spacing() / self.degree as f64
    }

    pub fn coordinate(&self, ax: usize, idx: usize) -> f64 {
        self.axes[ax].min + idx as f64 * self.node_spacing(ax)
    }

    pub fn node_multi_index(&self, l: usize) -> Multi<usize> {
        unflatten(l, &self.nodes_per_axis)
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.node_strides)
            .map(|(i, s)| i * s)
            .sum()
    }

    pub fn node_strides(&self) -> &[usize] {
        &self.node_strides
    }

    pub fn node_coords(&self, l: usize) -> Multi<f64> {
        let m = self.node_multi_index(l);
        let mut c = [0.0; MAX_DIM];
        for ax in 0..self.dim() {
            c[ax] = self.coordinate(ax, m[ax]);
        }
        c
    }

    /// Coordinates of every node along one axis.
    pub fn axis_coordinates(&self, ax: usize) -> Vec<f64> {
        (0..self.nodes_per_axis[ax])
            .map(|i| self.coordinate(ax, i))
            .collect()
    }

    pub fn element_multi_index(&self, e: usize) -> Multi<usize> {
        let mut m = [0; MAX_DIM];
        let mut rest = e;
        for ax in 0..self.dim() {
            m[ax] = rest / self.element_strides[ax];
            rest %= self.element_strides[ax];
        }
        m
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        let n = self.n_local();
        &self.element_dofs[e * n..(e + 1) * n]
    }

    /// Lower corner of an element (unwrapped coordinates).
    pub fn element_origin(&self, e: usize) -> Multi<f64> {
        let m = self.element_multi_index(e);
        let mut o = [0.0; MAX_DIM];
        for ax in 0..self.dim() {
            o[ax] = self.axes[ax].min + m[ax] as f64 * self.element_size(ax);
        }
        o
    }

    pub fn element_volume(&self) -> f64 {
        (0..self.dim()).map(|ax| self.element_size(ax)).product()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length()).product()
    }

    /// Mesh over a contiguous range of this mesh's axes.
    pub fn sub_mesh(&self, axes: std::ops::Range<usize>) -> Result<TensorMesh> {
        let sub: Vec<AxisSpec> = self.axes[axes.clone()].to_vec();
        let phys = self.physical_dims.saturating_sub(axes.start).min(sub.len());
        TensorMesh::new(sub, self.degree, phys)
    }

    pub fn physical_mesh(&self) -> Result<TensorMesh> {
        self.sub_mesh(0..self.physical_dims)
    }

    pub fn velocity_mesh(&self) -> Result<TensorMesh> {
        let m = self.sub_mesh(self.physical_dims..self.dim())?;
        let axes = m.axes.clone();
        TensorMesh::new(axes, self.degree, 0)
    }

    /// Node indices along one axis that share an element with node `g`.
    pub fn axis_patch(&self, ax: usize, g: usize) -> Vec<usize> {
        let k = self.degree;
        let spec = &self.axes[ax];
        let n = self.nodes_per_axis[ax];
        let mut elems: Vec<usize> = Vec::with_capacity(2);
        if g % k == 0 {
            let e = g / k;
            if e >= 1 {
                elems.push(e - 1);
            } else if spec.periodic {
                elems.push(spec.elements - 1);
            }
            if e < spec.elements {
                elems.push(e);
            }
        } else {
            elems.push(g / k);
        }
        let mut out: Vec<usize> = elems
            .iter()
            .flat_map(|&e| (0..=k).map(move |a| e * k + a))
            .map(|i| if spec.periodic { i % n } else { i })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All nodes within the support of the basis function of `node`.
    pub fn node_patch(&self, node: usize) -> NodePatch {
        let m = self.node_multi_index(node);
        let per_axis: Vec<Vec<usize>> = (0..self.dim())
            .map(|ax| self.axis_patch(ax, m[ax]))
            .collect();
        let mut members = Vec::new();
        let mut cursor = vec![0usize; self.dim()];
        'outer: loop {
            let idx: usize = (0..self.dim())
                .map(|ax| per_axis[ax][cursor[ax]] * self.node_strides[ax])
                .sum();
            members.push(idx);
            for ax in (0..self.dim()).rev() {
                cursor[ax] += 1;
                if cursor[ax] < per_axis[ax].len() {
                    continue 'outer;
                }
                cursor[ax] = 0;
            }
            break;
        }
        members.sort_unstable();
        NodePatch {
            center: node,
            members,
        }
    }

    /// Permutation `π` with `coords(π(l)) = (x(l), -v(l))`.
    pub fn reflect_velocity_map(&self) -> Result<Vec<usize>> {
        if self.velocity_dims() == 0 {
            return Err(Error::InvalidAxis("mesh has no velocity axis".into()));
        }
        for ax in self.physical_dims..self.dim() {
            let a = &self.axes[ax];
            let scale = a.min.abs().max(a.max.abs());
            if (a.min + a.max).abs() > 1e-12 * scale {
                return Err(Error::AsymmetricVelocityAxis {
                    min: a.min,
                    max: a.max,
                });
            }
        }
        Ok((0..self.n_nodes)
            .map(|l| {
                let mut m = self.node_multi_index(l);
                for ax in self.physical_dims..self.dim() {
                    let n = self.nodes_per_axis[ax];
                    m[ax] = if self.axes[ax].periodic {
                        (n - m[ax]) % n
                    } else {
                        n - 1 - m[ax]
                    };
                }
                self.node_index(&m[..self.dim()])
            })
            .collect())
    }
}

/// Gathers `field` through a node permutation: `out[l] = field[perm[l]]`.
pub fn permute_field(field: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&p| field[p]).collect()
}

fn strides(counts: &[usize]) -> Vec<usize> {
    let mut s = vec![1; counts.len()];
    for ax in (0..counts.len().saturating_sub(1)).rev() {
        s[ax] = s[ax + 1] * counts[ax + 1];
    }
    s
}

fn unflatten(mut idx: usize, counts: &[usize]) -> Multi<usize> {
    let mut m = [0; MAX_DIM];
    for ax in (0..counts.len()).rev() {
        m[ax] = idx % counts[ax];
        idx /= counts[ax];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn landau_mesh_counts() {
        let mesh = TensorMesh::phase_space(
            AxisSpec::periodic(0.0, 4.0 * PI, 32),
            AxisSpec::periodic(-6.0, 6.0, 32),
            1,
        )
        .unwrap();
        assert_eq!(mesh.n_elements(), 32 * 32);
        assert_eq!(mesh.nodes_per_axis(), &[32, 32]);
        assert!((mesh.element_size(0) - 4.0 * PI / 32.0).abs() < 1e-15);
        assert!((mesh.element_size(1) - 12.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_periodic_axis() {
        let mesh = build_mesh(&[AxisSpec::periodic(0.0, 1.0, 2)], 3).unwrap();
        assert_eq!(mesh.n_nodes(), 6);
        assert!((mesh.node_spacing(0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(mesh.element_dofs(1), &[3, 4, 5, 0]);
    }

    #[test]
    fn inclusive_node_count_convention() {
        // 97x193 unwrapped nodes for Q2 correspond to 48x96 elements.
        let mesh = TensorMesh::phase_space(
            AxisSpec::periodic(0.0, 4.0 * PI, 48),
            AxisSpec::periodic(-6.0, 6.0, 96),
            2,
        )
        .unwrap();
        assert_eq!(mesh.nodes_per_axis(), &[96, 192]);
        assert_eq!((97 - 1) / 2, mesh.axis(0).elements);
        assert_eq!((193 - 1) / 2, mesh.axis(1).elements);
    }

    #[test]
    fn invalid_axes_rejected() {
        assert!(build_mesh(&[AxisSpec::periodic(0.0, 1.0, 0)], 1).is_err());
        assert!(build_mesh(&[AxisSpec::periodic(1.0, 1.0, 4)], 1).is_err());
        assert!(matches!(
            build_mesh(&[AxisSpec::periodic(0.0, 1.0, 4)], 4),
            Err(Error::InvalidDegree(4))
        ));
    }

    #[test]
    fn q1_patches_wrap() {
        let mesh = build_mesh(
            &[AxisSpec::periodic(0.0, 1.0, 5), AxisSpec::periodic(0.0, 1.0, 5)],
            1,
        )
        .unwrap();
        let interior = mesh.node_index(&[2, 2]);
        assert_eq!(mesh.node_patch(interior).members.len(), 9);
        let corner = mesh.node_patch(0);
        assert_eq!(corner.members.len(), 9);
        assert!(corner.members.contains(&mesh.node_index(&[4, 4])));
        assert!(corner.members.contains(&0));
    }

    #[test]
    fn q2_interior_patch_is_one_element() {
        let mesh = build_mesh(
            &[AxisSpec::periodic(0.0, 1.0, 4), AxisSpec::periodic(0.0, 1.0, 4)],
            2,
        )
        .unwrap();
        let node = mesh.node_index(&[3, 5]);
        let patch = mesh.node_patch(node);
        // brute force: union of the nodes of every element containing the node
        let mut expect: Vec<usize> = (0..mesh.n_elements())
            .filter(|&e| mesh.element_dofs(e).contains(&node))
            .flat_map(|e| mesh.element_dofs(e).to_vec())
            .collect();
        expect.sort_unstable();
        expect.dedup();
        assert_eq!(patch.members, expect);
        assert_eq!(patch.members.len(), 9);
    }

    #[test]
    fn patch_matches_element_enumeration_everywhere() {
        for k in 1..=3 {
            let mesh = TensorMesh::new(
                vec![AxisSpec::periodic(0.0, 2.0, 3), AxisSpec::new(-1.0, 1.0, 3, false)],
                k,
                1,
            )
            .unwrap();
            for node in 0..mesh.n_nodes() {
                let mut expect: Vec<usize> = (0..mesh.n_elements())
                    .filter(|&e| mesh.element_dofs(e).contains(&node))
                    .flat_map(|e| mesh.element_dofs(e).to_vec())
                    .collect();
                expect.sort_unstable();
                expect.dedup();
                assert_eq!(mesh.node_patch(node).members, expect, "k={k} node={node}");
            }
        }
    }

    #[test]
    fn element_volumes_sum_to_domain() {
        let mesh = TensorMesh::phase_space(
            AxisSpec::periodic(0.0, 20.0 * PI, 32),
            AxisSpec::periodic(-8.0, 8.0, 64),
            3,
        )
        .unwrap();
        let total = mesh.element_volume() * mesh.n_elements() as f64;
        assert!((total - mesh.volume()).abs() <= 1e-13 * mesh.volume());
    }

    #[test]
    fn every_node_in_one_to_four_elements() {
        let mesh = TensorMesh::new(
            vec![AxisSpec::periodic(0.0, 1.0, 4), AxisSpec::new(0.0, 1.0, 3, false)],
            2,
            2,
        )
        .unwrap();
        let mut count = vec![0usize; mesh.n_nodes()];
        for e in 0..mesh.n_elements() {
            for &g in mesh.element_dofs(e) {
                count[g] += 1;
            }
        }
        assert!(count.iter().all(|&c| (1..=4).contains(&c)));
    }

    #[test]
    fn shared_faces_use_identical_indices() {
        let mesh = build_mesh(
            &[AxisSpec::periodic(0.0, 1.0, 3), AxisSpec::periodic(0.0, 1.0, 3)],
            3,
        )
        .unwrap();
        let k = 3;
        // right face of element (0,0) equals left face of element (1,0)
        let left = mesh.element_dofs(0);
        let right = mesh.element_dofs(3);
        for b in 0..=k {
            assert_eq!(left[k * (k + 1) + b], right[b]);
        }
    }

    #[test]
    fn reflection_is_involution() {
        let mesh = TensorMesh::phase_space(
            AxisSpec::periodic(0.0, 4.0 * PI, 6),
            AxisSpec::periodic(-6.0, 6.0, 8),
            2,
        )
        .unwrap();
        let perm = mesh.reflect_velocity_map().unwrap();
        for l in 0..mesh.n_nodes() {
            let c = mesh.node_coords(l);
            let r = mesh.node_coords(perm[l]);
            assert_eq!(c[0], r[0]);
            let v = c[1];
            // -6 and 6 are the same periodic node
            let mirrored = if (v + 6.0).abs() < 1e-12 { -6.0 } else { -v };
            assert!((r[1] - mirrored).abs() < 1e-12);
            assert_eq!(perm[perm[l]], l);
        }
        let at = |v: f64| {
            (0..mesh.n_nodes())
                .find(|&l| mesh.node_coords(l)[0] == 0.0 && (mesh.node_coords(l)[1] - v).abs() < 1e-12)
                .unwrap()
        };
        assert_eq!(perm[at(1.5)], at(-1.5));
        assert_eq!(perm[at(0.0)], at(0.0));
    }

    #[test]
    fn reflection_requires_symmetric_axis() {
        let mesh = TensorMesh::phase_space(
            AxisSpec::periodic(0.0, 1.0, 4),
            AxisSpec::periodic(-5.0, 6.0, 4),
            1,
        )
        .unwrap();
        assert!(matches!(
            mesh.reflect_velocity_map(),
            Err(Error::AsymmetricVelocityAxis { .. })
        ));
    }
}

//! Tensor-product (Kronecker) structure of operators on uniform tensor meshes.
//!
//! On a tensor mesh the consistent mass matrix factors as `M_0 ⊗ M_1 ⊗ …`, and
//! every advection component that depends on at most one *other* axis factors
//! the same way. These operators are applied one axis at a time, and the mass
//! matrix is inverted exactly through per-axis Cholesky factors.

use super::assembly::{AdvectionField, Assembler, Component};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::{build_mesh, TensorMesh};

fn split_shape(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// `y = (I ⊗ … ⊗ A ⊗ … ⊗ I) x` with `A` acting on `axis`.
pub fn apply_along_axis(mat: &CsrMatrix, shape: &[usize], axis: usize, x: &[f64], y: &mut [f64]) {
    let (outer, n, inner) = split_shape(shape, axis);
    assert_eq!(mat.nrows(), n);
    assert_eq!(x.len(), outer * n * inner);
    y.fill(0.0);
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..n {
            let (cols, vals) = mat.row(i);
            let yi = base + i * inner;
            for (&j, &a) in cols.iter().zip(vals) {
                let xj = base + j * inner;
                if inner == 1 {
                    y[yi] += a * x[xj];
                } else {
                    let (ys, xs) = (&mut y[yi..yi + inner], &x[xj..xj + inner]);
                    for (yv, xv) in ys.iter_mut().zip(xs) {
                        *yv += a * xv;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct KroneckerTerm {
    pub coeff: f64,
    /// One factor per axis; `None` is the identity.
    pub factors: Vec<Option<CsrMatrix>>,
}

/// Sum of scaled Kronecker products.
#[derive(Debug, Clone)]
pub struct KroneckerOperator {
    shape: Vec<usize>,
    terms: Vec<KroneckerTerm>,
}

impl KroneckerOperator {
    pub fn new(shape: Vec<usize>, terms: Vec<KroneckerTerm>) -> Self {
        Self { shape, terms }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn terms(&self) -> &[KroneckerTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `y += alpha * K x`
    pub fn apply_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for term in &self.terms {
            a.copy_from_slice(x);
            for (ax, f) in term.factors.iter().enumerate() {
                if let Some(m) = f {
                    apply_along_axis(m, &self.shape, ax, &a, &mut b);
                    std::mem::swap(&mut a, &mut b);
                }
            }
            let c = alpha * term.coeff;
            for (yv, av) in y.iter_mut().zip(&a) {
                *yv += c * av;
            }
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.apply_add(1.0, x, y);
    }
}

/// Envelope (skyline) Cholesky factorization of a small SPD matrix.
///
/// Periodic 1D finite element matrices are banded plus a wrap-around corner;
/// the envelope keeps the fill confined to the last `k` rows.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).0.iter().copied().filter(|&j| j <= i).min().unwrap_or(i))
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + i - first[i] + 1);
        }
        let mut s = Self {
            n,
            first,
            offsets,
            data: Vec::new(),
        };
        s.data = vec![0.0; s.offsets[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    let p = s.offsets[i] + j - s.first[i];
                    s.data[p] = v;
                }
            }
        }
        for i in 0..n {
            for j in s.first[i]..=i {
                let p0 = s.first[i].max(s.first[j]);
                let mut sum = s.data[s.offsets[i] + j - s.first[i]];
                let ri = s.offsets[i] - s.first[i];
                let rj = s.offsets[j] - s.first[j];
                for p in p0..j {
                    sum -= s.data[ri + p] * s.data[rj + p];
                }
                if j < i {
                    let djj = s.data[rj + j];
                    s.data[ri + j] = sum / djj;
                } else {
                    if !(sum > 0.0) {
                        return Err(Error::Singular(format!(
                            "matrix not positive definite at row {i}"
                        )));
                    }
                    s.data[ri + i] = sum.sqrt();
                }
            }
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.offsets[i] + j - self.first[i]]
    }

    /// Solves in place for `lanes` right-hand sides stored row-major `[n][lanes]`.
    pub fn solve_lanes(&self, b: &mut [f64], lanes: usize) {
        assert_eq!(b.len(), self.n * lanes);
        for i in 0..self.n {
            for p in self.first[i]..i {
                let l = self.at(i, p);
                let (head, tail) = b.split_at_mut(i * lanes);
                let src = &head[p * lanes..(p + 1) * lanes];
                for (t, s) in tail[..lanes].iter_mut().zip(src) {
                    *t -= l * s;
                }
            }
            let d = 1.0 / self.at(i, i);
            b[i * lanes..(i + 1) * lanes].iter_mut().for_each(|v| *v *= d);
        }
        for i in (0..self.n).rev() {
            let d = 1.0 / self.at(i, i);
            b[i * lanes..(i + 1) * lanes].iter_mut().for_each(|v| *v *= d);
            for p in self.first[i]..i {
                let l = self.at(i, p);
                let (head, tail) = b.split_at_mut(i * lanes);
                let src = &tail[..lanes];
                for (t, s) in head[p * lanes..(p + 1) * lanes].iter_mut().zip(src) {
                    *t -= l * s;
                }
            }
        }
    }

    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lanes(b, 1);
    }
}

/// Exact inverse of a Kronecker product of SPD factors.
#[derive(Debug, Clone)]
pub struct KroneckerSolver {
    shape: Vec<usize>,
    factors: Vec<SkylineCholesky>,
}

impl KroneckerSolver {
    pub fn new(factors: &[CsrMatrix]) -> Result<Self> {
        let shape = factors.iter().map(|f| f.nrows()).collect();
        let factors = factors
            .iter()
            .map(SkylineCholesky::factor)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shape, factors })
    }

    /// Overwrites `b` with `(A_0 ⊗ A_1 ⊗ …)^{-1} b`.
    pub fn solve(&self, b: &mut [f64]) {
        for (ax, f) in self.factors.iter().enumerate() {
            let (outer, n, inner) = split_shape(&self.shape, ax);
            for o in 0..outer {
                f.solve_lanes(&mut b[o * n * inner..(o + 1) * n * inner], inner);
            }
        }
    }
}

/// Dense row-major `n × n` matrix applied along one axis.
fn apply_dense_along_axis(mat: &[f64], shape: &[usize], axis: usize, x: &[f64], y: &mut [f64]) {
    let (outer, n, inner) = split_shape(shape, axis);
    y.fill(0.0);
    for o in 0..outer {
        let base = o * n * inner;
        for p in 0..n {
            let row = &mat[p * n..(p + 1) * n];
            if inner == 1 {
                y[base + p] = row.iter().zip(&x[base..base + n]).map(|(a, b)| a * b).sum();
                continue;
            }
            let yp = base + p * inner;
            for (i, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let xi = base + i * inner;
                let (ys, xs) = (&mut y[yp..yp + inner], &x[xi..xi + inner]);
                for (yv, xv) in ys.iter_mut().zip(xs) {
                    *yv += a * xv;
                }
            }
        }
    }
}

/// Direct solver for `a ⊗_a M_a + Σ_a c_a (M_0 ⊗ … ⊗ K_a ⊗ … ⊗ M_{d−1})`
/// with SPD `M_a` and symmetric positive semidefinite `K_a`, by fast
/// diagonalization: `K_a V_a = M_a V_a Λ_a`, `V_aᵀ M_a V_a = I`.
/// Modes whose eigenvalue sum vanishes are projected out.
#[derive(Debug, Clone)]
pub struct FastDiagonalization {
    shape: Vec<usize>,
    /// `V_a` and `V_aᵀ`, row-major.
    vecs: Vec<(Vec<f64>, Vec<f64>)>,
    denom: Vec<f64>,
}

impl FastDiagonalization {
    pub fn new(mass: &[CsrMatrix], stiffness: &[CsrMatrix], mass_coeff: f64, coeffs: &[f64]) -> Result<Self> {
        use nalgebra::DMatrix;
        if mass.len() != stiffness.len() || mass.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: mass.len(),
                got: stiffness.len().min(coeffs.len()),
            });
        }
        let shape: Vec<usize> = mass.iter().map(|m| m.nrows()).collect();
        let mut vecs = Vec::new();
        let mut vals = Vec::new();
        for (m, k) in mass.iter().zip(stiffness) {
            let n = m.nrows();
            let dense = |a: &CsrMatrix| DMatrix::from_fn(n, n, |i, j| a.get(i, j));
            let chol = nalgebra::Cholesky::new(dense(m))
                .ok_or_else(|| Error::Singular("axis mass matrix is not positive definite".into()))?;
            let l = chol.l();
            let l_inv = l
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Singular("mass factor is singular".into()))?;
            let c = &l_inv * dense(k) * l_inv.transpose();
            let c = (&c + c.transpose()) * 0.5;
            let eig = nalgebra::SymmetricEigen::new(c);
            let v = l_inv.transpose() * eig.eigenvectors;
            let row_major: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| v[(i, j)]).collect();
            let transposed: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| v[(j, i)]).collect();
            vecs.push((row_major, transposed));
            vals.push(eig.eigenvalues.iter().copied().collect::<Vec<f64>>());
        }
        let total: usize = shape.iter().product();
        let scale = mass_coeff.abs()
            + coeffs
                .iter()
                .zip(&vals)
                .map(|(c, l)| c.abs() * l.iter().fold(0.0f64, |a, b| a.max(b.abs())))
                .sum::<f64>();
        let denom = (0..total)
            .map(|idx| {
                let mut rest = idx;
                let mut d = mass_coeff;
                for ax in (0..shape.len()).rev() {
                    d += coeffs[ax] * vals[ax][rest % shape[ax]];
                    rest /= shape[ax];
                }
                if d.abs() <= 1e-12 * scale {
                    0.0
                } else {
                    1.0 / d
                }
            })
            .collect();
        Ok(Self { shape, vecs, denom })
    }

    pub fn len(&self) -> usize {
        self.denom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.denom.is_empty()
    }

    /// Overwrites `b` with the solution.
    pub fn solve(&self, b: &mut [f64]) {
        let mut tmp = vec![0.0; b.len()];
        for (ax, (_, vt)) in self.vecs.iter().enumerate() {
            apply_dense_along_axis(vt, &self.shape, ax, b, &mut tmp);
            b.copy_from_slice(&tmp);
        }
        b.iter_mut().zip(&self.denom).for_each(|(v, d)| *v *= d);
        for (ax, (v, _)) in self.vecs.iter().enumerate() {
            apply_dense_along_axis(v, &self.shape, ax, b, &mut tmp);
            b.copy_from_slice(&tmp);
        }
    }
}

/// One-dimensional operators along each axis of a tensor mesh.
#[derive(Debug, Clone)]
pub struct AxisOperators {
    shape: Vec<usize>,
    pub assemblers: Vec<Assembler>,
    /// `∫ φ_j φ_i`
    pub mass: Vec<CsrMatrix>,
    /// `∫ φ_j' φ_i`
    pub derivative: Vec<CsrMatrix>,
    /// `∫ φ_j' φ_i'`
    pub stiffness: Vec<CsrMatrix>,
}

impl AxisOperators {
    pub fn new(mesh: &TensorMesh) -> Result<Self> {
        let mut assemblers = Vec::new();
        let mut mass = Vec::new();
        let mut derivative = Vec::new();
        let mut stiffness = Vec::new();
        for ax in 0..mesh.dim() {
            let m1 = build_mesh(&[*mesh.axis(ax)], mesh.degree())?;
            let asm = Assembler::new(&m1);
            mass.push(asm.mass());
            derivative.push(asm.advection(&AdvectionField::constant(&[1.0])));
            stiffness.push(asm.constant_operator(0.0, &[1.0]));
            assemblers.push(asm);
        }
        Ok(Self {
            shape: mesh.nodes_per_axis().to_vec(),
            assemblers,
            mass,
            derivative,
            stiffness,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn mass_solver(&self) -> Result<KroneckerSolver> {
        KroneckerSolver::new(&self.mass)
    }

    pub fn mass_operator(&self) -> KroneckerOperator {
        KroneckerOperator::new(
            self.shape.clone(),
            vec![KroneckerTerm {
                coeff: 1.0,
                factors: self.mass.iter().cloned().map(Some).collect(),
            }],
        )
    }

    /// Kronecker term for component `comp` of a transport field acting on `axis`,
    /// or `None` if the component does not factor.
    fn advection_term(&self, axis: usize, comp: &Component) -> Option<Option<KroneckerTerm>> {
        let mut factors: Vec<Option<CsrMatrix>> = self.mass.iter().cloned().map(Some).collect();
        let coeff = match comp {
            Component::Zero => return Some(None),
            Component::Constant(c) => *c,
            Component::Coordinate(b) if *b != axis => {
                factors[*b] = Some(self.assemblers[*b].weighted_mass(&Component::Coordinate(0)));
                1.0
            }
            Component::Nodal { axes, values } if axes.len() == 1 && axes[0] != axis => {
                let b = axes[0];
                factors[b] = Some(self.assemblers[b].weighted_mass(&Component::Nodal {
                    axes: vec![0],
                    values: values.clone(),
                }));
                1.0
            }
            _ => return None,
        };
        factors[axis] = Some(self.derivative[axis].clone());
        Some(Some(KroneckerTerm { coeff, factors }))
    }
}

/// Advection operator `C(β)` applied either through Kronecker factors or an
/// assembled sparse matrix.
#[derive(Debug, Clone)]
pub enum AdvectionOperator {
    Kronecker(KroneckerOperator),
    Assembled(CsrMatrix),
}

impl AdvectionOperator {
    pub fn build(axes: &AxisOperators, assembler: &Assembler, field: &AdvectionField) -> Self {
        let mut terms = Vec::new();
        for (ax, comp) in field.components.iter().enumerate() {
            match axes.advection_term(ax, comp) {
                Some(Some(t)) => terms.push(t),
                Some(None) => {}
                None => return AdvectionOperator::Assembled(assembler.advection(field)),
            }
        }
        AdvectionOperator::Kronecker(KroneckerOperator::new(axes.shape().to_vec(), terms))
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            AdvectionOperator::Kronecker(k) => k.apply(x, y),
            AdvectionOperator::Assembled(m) => m.matvec(x, y),
        }
    }

    pub fn apply_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        match self {
            AdvectionOperator::Kronecker(k) => k.apply_add(alpha, x, y),
            AdvectionOperator::Assembled(m) => m.matvec_add(alpha, x, y),
        }
    }
}

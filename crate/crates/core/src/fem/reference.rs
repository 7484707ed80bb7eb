//! One-dimensional Lagrange elements on equispaced nodes, Gauss–Legendre
//! quadrature, and the tensor-product tables used by element assembly.

use crate::mesh::{TensorMesh, MAX_DIM};

/// Gauss–Legendre points and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (points, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Degree-k Lagrange basis on `[0, 1]` with tabulated quadrature data.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// `values[q][a]` = basis `a` at quadrature point `q`.
    pub values: Vec<Vec<f64>>,
    /// `derivs[q][a]` = d/dt of basis `a` at quadrature point `q`.
    pub derivs: Vec<Vec<f64>>,
}

impl ReferenceElement {
    /// Element with `k + 2` Gauss points.
    pub fn new(degree: usize) -> Self {
        Self::with_quadrature(degree, degree + 2)
    }

    pub fn with_quadrature(degree: usize, n_points: usize) -> Self {
        let nodes: Vec<f64> = (0..=degree).map(|a| a as f64 / degree as f64).collect();
        let (points, weights) = gauss_legendre(n_points);
        let mut el = Self {
            degree,
            nodes,
            points: points.clone(),
            weights,
            values: Vec::new(),
            derivs: Vec::new(),
        };
        el.values = points.iter().map(|&t| el.eval_all(t)).collect();
        el.derivs = points.iter().map(|&t| el.eval_deriv_all(t)).collect();
        el
    }

    pub fn n_basis(&self) -> usize {
        self.degree + 1
    }

    pub fn basis(&self, a: usize, t: f64) -> f64 {
        let ta = self.nodes[a];
        self.nodes
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != a)
            .map(|(_, &tb)| (t - tb) / (ta - tb))
            .product()
    }

    pub fn basis_deriv(&self, a: usize, t: f64) -> f64 {
        let ta = self.nodes[a];
        let mut sum = 0.0;
        for (c, &tc) in self.nodes.iter().enumerate() {
            if c == a {
                continue;
            }
            let mut prod = 1.0 / (ta - tc);
            for (b, &tb) in self.nodes.iter().enumerate() {
                if b != a && b != c {
                    prod *= (t - tb) / (ta - tb);
                }
            }
            sum += prod;
        }
        sum
    }

    pub fn eval_all(&self, t: f64) -> Vec<f64> {
        (0..self.n_basis()).map(|a| self.basis(a, t)).collect()
    }

    pub fn eval_deriv_all(&self, t: f64) -> Vec<f64> {
        (0..self.n_basis()).map(|a| self.basis_deriv(a, t)).collect()
    }

    /// `∫_0^1 φ_a dt` for each basis function.
    pub fn basis_integrals(&self) -> Vec<f64> {
        (0..self.n_basis())
            .map(|a| {
                self.points
                    .iter()
                    .zip(&self.weights)
                    .map(|(&t, &w)| w * self.basis(a, t))
                    .sum()
            })
            .collect()
    }
}

/// Tensor-product basis tables on one (uniform) element of a mesh.
///
/// Every element of a uniform mesh shares the same Jacobian, so one table
/// serves the whole mesh.
#[derive(Debug, Clone)]
pub struct ElementTables {
    pub dim: usize,
    pub n_local: usize,
    pub n_qp: usize,
    /// Physical quadrature weight (reference weight times element volume).
    pub weights: Vec<f64>,
    /// `psi[q * n_local + a]`
    pub psi: Vec<f64>,
    /// `grad[(q * n_local + a) * dim + ax]`, physical derivatives.
    pub grad: Vec<f64>,
    /// Offset of each quadrature point from the element origin.
    pub offsets: Vec<[f64; MAX_DIM]>,
}

impl ElementTables {
    pub fn new(mesh: &TensorMesh, reference: &ReferenceElement) -> Self {
        let dim = mesh.dim();
        let nq1 = reference.points.len();
        let n_local = mesh.n_local();
        let n_qp = nq1.pow(dim as u32);
        let h: Vec<f64> = (0..dim).map(|ax| mesh.element_size(ax)).collect();

        let mut weights = Vec::with_capacity(n_qp);
        let mut psi = Vec::with_capacity(n_qp * n_local);
        let mut grad = Vec::with_capacity(n_qp * n_local * dim);
        let mut offsets = Vec::with_capacity(n_qp);
        for q in 0..n_qp {
            let qm = split(q, nq1, dim);
            let mut w = 1.0;
            let mut off = [0.0; MAX_DIM];
            for ax in 0..dim {
                w *= reference.weights[qm[ax]] * h[ax];
                off[ax] = reference.points[qm[ax]] * h[ax];
            }
            weights.push(w);
            offsets.push(off);
            for a in 0..n_local {
                let am = mesh.local_multi_index(a);
                let mut v = 1.0;
                for ax in 0..dim {
                    v *= reference.values[qm[ax]][am[ax]];
                }
                psi.push(v);
                for ax in 0..dim {
                    let mut g = 1.0;
                    for bx in 0..dim {
                        g *= if bx == ax {
                            reference.derivs[qm[bx]][am[bx]] / h[bx]
                        } else {
                            reference.values[qm[bx]][am[bx]]
                        };
                    }
                    grad.push(g);
                }
            }
        }
        Self {
            dim,
            n_local,
            n_qp,
            weights,
            psi,
            grad,
            offsets,
        }
    }

    #[inline]
    pub fn psi_row(&self, q: usize) -> &[f64] {
        &self.psi[q * self.n_local..(q + 1) * self.n_local]
    }

    #[inline]
    pub fn grad_row(&self, q: usize) -> &[f64] {
        let n = self.n_local * self.dim;
        &self.grad[q * n..(q + 1) * n]
    }

    /// Interpolates element-local nodal values at quadrature point `q`.
    #[inline]
    pub fn interpolate(&self, q: usize, local: &[f64]) -> f64 {
        self.psi_row(q)
            .iter()
            .zip(local)
            .map(|(p, v)| p * v)
            .sum()
    }
}

fn split(mut idx: usize, n: usize, dim: usize) -> [usize; MAX_DIM] {
    let mut m = [0; MAX_DIM];
    for ax in (0..dim).rev() {
        m[ax] = idx % n;
        idx /= n;
    }
    m
}

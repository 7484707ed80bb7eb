//! Anisotropic artificial viscosity: the first-order (upwind-equivalent)
//! bound, the smoothed finite element residual, the normalization with its
//! discontinuity indicator, and the resulting high-order viscosity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{AdvectionField, Assembler, CsrMatrix, Discretization, FastDiagonalization};
use crate::linsolve::{pcg_solve, SolveOptions};
use crate::mesh::TensorMesh;

/// Safety term added to `n_i²` before dividing by the normalization.
pub const NORMALIZATION_EPS: f64 = 1e-14;

/// Per-node diagonal viscosity coefficients, one nodal field per mesh axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityField {
    axes: Vec<Vec<f64>>,
    physical_dims: usize,
}

impl ViscosityField {
    pub fn zeros(mesh: &TensorMesh) -> Self {
        Self {
            axes: vec![vec![0.0; mesh.n_nodes()]; mesh.dim()],
            physical_dims: mesh.physical_dims(),
        }
    }

    pub fn from_axes(mesh: &TensorMesh, axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.len() != mesh.dim() {
            return Err(Error::DimensionMismatch {
                expected: mesh.dim(),
                got: axes.len(),
            });
        }
        if let Some(a) = axes.iter().find(|a| a.len() != mesh.n_nodes()) {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_nodes(),
                got: a.len(),
            });
        }
        Ok(Self {
            axes,
            physical_dims: mesh.physical_dims(),
        })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axes_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.axes
    }

    /// Coefficients along the position axes.
    pub fn eps_x(&self) -> &[Vec<f64>] {
        &self.axes[..self.physical_dims]
    }

    /// Coefficients along the velocity axes.
    pub fn eps_v(&self) -> &[Vec<f64>] {
        &self.axes[self.physical_dims..]
    }

    pub fn max_per_axis(&self) -> Vec<f64> {
        self.axes
            .iter()
            .map(|a| a.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.axes.iter().all(|a| a.iter().all(|&v| v == 0.0))
    }

    /// `true` if every entry lies in `[0, other]`.
    pub fn bounded_by(&self, other: &ViscosityField) -> bool {
        self.axes.iter().zip(&other.axes).all(|(a, b)| {
            a.iter()
                .zip(b)
                .all(|(&x, &y)| x >= 0.0 && x <= y)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilizationMode {
    /// Plain Galerkin.
    None,
    /// First-order anisotropic viscosity every step.
    LowOrder,
    /// Residual-based viscosity with anisotropic scaling.
    Rv,
    /// Residual-based viscosity with one isotropic length scale.
    RvIsotropic,
}

impl StabilizationMode {
    pub const ALL: [StabilizationMode; 4] = [Self::None, Self::LowOrder, Self::Rv, Self::RvIsotropic];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::LowOrder => "low_order",
            Self::Rv => "rv",
            Self::RvIsotropic => "rv_isotropic",
        }
    }

    pub fn is_isotropic(self) -> bool {
        self == Self::RvIsotropic
    }
}

impl fmt::Display for StabilizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StabilizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "galerkin" => Ok(Self::None),
            "low_order" | "low" | "first_order" => Ok(Self::LowOrder),
            "rv" => Ok(Self::Rv),
            "rv_isotropic" | "isotropic" => Ok(Self::RvIsotropic),
            other => Err(Error::Config(format!("unknown stabilization mode `{other}`"))),
        }
    }
}

/// How the residual's time derivative is estimated before two accepted
/// steps of history exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bootstrap {
    /// Use the first-order viscosity until a BDF2 history is available.
    LowOrder,
    /// Use the semi-discrete Galerkin derivative at the first step and
    /// BDF1 at the second.
    SemiDiscrete,
}

impl FromStr for Bootstrap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low_order" => Ok(Self::LowOrder),
            "semi_discrete" => Ok(Self::SemiDiscrete),
            other => Err(Error::Config(format!("unknown bootstrap `{other}`"))),
        }
    }
}

impl fmt::Display for Bootstrap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LowOrder => "low_order",
            Self::SemiDiscrete => "semi_discrete",
        })
    }
}

fn patch_reduce(mesh: &TensorMesh, values: &[f64], init: f64, op: fn(f64, f64) -> f64) -> Vec<f64> {
    let shape = mesh.nodes_per_axis();
    let mut cur = values.to_vec();
    let mut next = vec![0.0; cur.len()];
    for ax in 0..mesh.dim() {
        let n = shape[ax];
        let outer: usize = shape[..ax].iter().product();
        let inner: usize = shape[ax + 1..].iter().product();
        let patches: Vec<Vec<usize>> = (0..n).map(|g| mesh.axis_patch(ax, g)).collect();
        for o in 0..outer {
            for (g, patch) in patches.iter().enumerate() {
                let dst = (o * n + g) * inner;
                next[dst..dst + inner].fill(init);
                for &p in patch {
                    let src = (o * n + p) * inner;
                    for t in 0..inner {
                        next[dst + t] = op(next[dst + t], cur[src + t]);
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Maximum of a nodal field over each node patch.
pub fn patch_max(mesh: &TensorMesh, values: &[f64]) -> Vec<f64> {
    patch_reduce(mesh, values, f64::NEG_INFINITY, f64::max)
}

/// Minimum of a nodal field over each node patch.
pub fn patch_min(mesh: &TensorMesh, values: &[f64]) -> Vec<f64> {
    patch_reduce(mesh, values, f64::INFINITY, f64::min)
}

/// Per-axis length scales `h_a / k` (anisotropic) or `min_a h_a / k` for every axis (isotropic).
pub fn length_scales(mesh: &TensorMesh, isotropic: bool) -> Vec<f64> {
    let k = mesh.degree() as f64;
    let h: Vec<f64> = (0..mesh.dim()).map(|ax| mesh.element_size(ax) / k).collect();
    if isotropic {
        let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
        vec![hmin; h.len()]
    } else {
        h
    }
}

/// `ε^L_a(i) = ½ (h_a/k) max_{j ∈ I(i)} |β_a(x_j)|`.
pub fn low_order_viscosity(mesh: &TensorMesh, beta: &AdvectionField) -> ViscosityField {
    let scales = length_scales(mesh, false);
    let axes = beta
        .components
        .iter()
        .zip(&scales)
        .map(|(c, &s)| {
            let abs: Vec<f64> = c.node_values(mesh).iter().map(|v| v.abs()).collect();
            patch_max(mesh, &abs).into_iter().map(|m| 0.5 * s * m).collect()
        })
        .collect();
    ViscosityField {
        axes,
        physical_dims: mesh.physical_dims(),
    }
}

/// `ε_a(i) = ½ (h_min/k) max_{j ∈ I(i)} |β(x_j)|` on every axis.
pub fn isotropic_viscosity(mesh: &TensorMesh, beta: &AdvectionField) -> ViscosityField {
    let s = length_scales(mesh, true)[0];
    let vals = beta.node_values(mesh);
    let norm: Vec<f64> = (0..mesh.n_nodes())
        .map(|l| vals.iter().map(|c| c[l] * c[l]).sum::<f64>().sqrt())
        .collect();
    let eps: Vec<f64> = patch_max(mesh, &norm).into_iter().map(|m| 0.5 * s * m).collect();
    ViscosityField {
        axes: vec![eps; mesh.dim()],
        physical_dims: mesh.physical_dims(),
    }
}

/// Backward-difference estimate of `∂f/∂t` at the newest level.
///
/// `dt_now = t_n − t_{n−1}`, `dt_prev = t_{n−1} − t_{n−2}`. The second-order
/// formula uses the exact variable-step coefficients while the step ratio
/// stays within `ratio_tol`; otherwise, or without `f_prev2`, it falls back
/// to first order.
pub fn bdf_derivative(
    f_now: &[f64],
    f_prev1: &[f64],
    f_prev2: Option<&[f64]>,
    dt_now: f64,
    dt_prev: f64,
    ratio_tol: f64,
) -> Vec<f64> {
    match f_prev2 {
        Some(f2) if (dt_now - dt_prev).abs() <= ratio_tol * dt_now => {
            let w = dt_now / dt_prev;
            let a0 = (1.0 + 2.0 * w) / (1.0 + w) / dt_now;
            let a1 = (1.0 + w) / dt_now;
            let a2 = w * w / (1.0 + w) / dt_now;
            f_now
                .iter()
                .zip(f_prev1)
                .zip(f2)
                .map(|((a, b), c)| a0 * a - a1 * b + a2 * c)
                .collect()
        }
        _ => f_now
            .iter()
            .zip(f_prev1)
            .map(|(a, b)| (a - b) / dt_now)
            .collect(),
    }
}

/// `(|∂_t f + β·∇f|, ψ_i)` by element quadrature.
pub fn residual_load(asm: &Assembler, dfdt: &[f64], f: &[f64], beta: &AdvectionField) -> Vec<f64> {
    let mesh = asm.mesh();
    let t = asm.tables();
    let n = t.n_local;
    let d = t.dim;
    let mut out = vec![0.0; mesh.n_nodes()];
    let mut fl = vec![0.0; n];
    let mut dl = vec![0.0; n];
    let mut bl: Vec<Vec<f64>> = vec![vec![0.0; n]; d];
    for e in 0..mesh.n_elements() {
        asm.gather(e, f, &mut fl);
        asm.gather(e, dfdt, &mut dl);
        for (ax, c) in beta.components.iter().enumerate() {
            c.gather(mesh, e, &mut bl[ax]);
        }
        let dofs = mesh.element_dofs(e);
        for q in 0..t.n_qp {
            let g = t.grad_row(q);
            let mut val = t.interpolate(q, &dl);
            for ax in 0..d {
                let b = t.interpolate(q, &bl[ax]);
                if b != 0.0 {
                    let df: f64 = (0..n).map(|j| g[j * d + ax] * fl[j]).sum();
                    val += b * df;
                }
            }
            let w = t.weights[q] * val.abs();
            for (&gi, &p) in dofs.iter().zip(t.psi_row(q)) {
                out[gi] += w * p;
            }
        }
    }
    out
}

/// Solver for the smoothed residual projection
/// `(R, ψ) + Σ_a (h_a²/k)(∂_a R, ∂_a ψ) = (|∂_t f + β·∇f|, ψ)`.
#[derive(Debug, Clone)]
pub struct ResidualSmoother {
    matrix: CsrMatrix,
    precond: FastDiagonalization,
    last: Option<Vec<f64>>,
    opts: SolveOptions,
}

impl ResidualSmoother {
    pub fn new(disc: &Discretization) -> Result<Self> {
        let mesh = disc.mesh();
        let k = mesh.degree() as f64;
        let coeffs: Vec<f64> = (0..mesh.dim())
            .map(|ax| mesh.element_size(ax).powi(2) / k)
            .collect();
        let matrix = disc.assembler().constant_operator(1.0, &coeffs);
        let ops = disc.axis_ops();
        let precond = FastDiagonalization::new(&ops.mass, &ops.stiffness, 1.0, &coeffs)?;
        Ok(Self {
            matrix,
            precond,
            last: None,
            opts: SolveOptions {
                tol: 1e-10,
                max_iter: 500,
            },
        })
    }

    pub fn with_options(mut self, opts: SolveOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&mut self, load: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.last.take().unwrap_or_else(|| vec![0.0; load.len()]);
        pcg_solve(&self.matrix, &self.precond, load, &mut x, self.opts)?;
        self.last = Some(x.clone());
        Ok(x)
    }

    /// Smoothed residual for a given time-derivative estimate.
    pub fn residual(
        &mut self,
        disc: &Discretization,
        dfdt: &[f64],
        f: &[f64],
        beta: &AdvectionField,
    ) -> Result<Vec<f64>> {
        let load = residual_load(disc.assembler(), dfdt, f, beta);
        self.solve(&load)
    }
}

/// Solution history entering the residual.
#[derive(Debug, Clone, Copy)]
pub struct ResidualContext<'a> {
    pub f_now: &'a [f64],
    pub f_prev1: &'a [f64],
    pub f_prev2: Option<&'a [f64]>,
    pub dt_now: f64,
    pub dt_prev: f64,
    pub beta: &'a AdvectionField,
}

/// Smoothed residual `R_h` with a BDF time derivative (one-shot convenience).
pub fn compute_residual(ctx: &ResidualContext<'_>, disc: &Discretization) -> Result<Vec<f64>> {
    let dfdt = bdf_derivative(ctx.f_now, ctx.f_prev1, ctx.f_prev2, ctx.dt_now, ctx.dt_prev, 0.1);
    ResidualSmoother::new(disc)?.residual(disc, &dfdt, ctx.f_now, ctx.beta)
}

/// `α_i = (max_{I(i)} f − min_{I(i)} f) / (max f − min f)`, zero for a constant field.
pub fn discontinuity_indicator(mesh: &TensorMesh, f: &[f64]) -> Vec<f64> {
    let gmax = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gmin = f.iter().copied().fold(f64::INFINITY, f64::min);
    let range = gmax - gmin;
    if !(range > 0.0) {
        return vec![0.0; f.len()];
    }
    let hi = patch_max(mesh, f);
    let lo = patch_min(mesh, f);
    hi.iter().zip(&lo).map(|(h, l)| (h - l) / range).collect()
}

/// `n_i = (1 − ½α_i) ‖f − f̄‖_{L²(Ω)}`.
pub fn normalization(disc: &Discretization, f: &[f64]) -> Vec<f64> {
    let mean = disc.integrate(f) / disc.mesh().volume();
    let dev: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let norm = disc.inner(&dev, &dev).max(0.0).sqrt();
    discontinuity_indicator(disc.mesh(), f)
        .into_iter()
        .map(|a| (1.0 - 0.5 * a) * norm)
        .collect()
}

/// `ε^H_a(i) = min(ε^L_a(i), s_a² R_i n_i / (n_i² + 10⁻¹⁴))` with per-axis scales `s_a`.
/// Negative residual values (smoothing undershoot) contribute nothing.
pub fn high_order_viscosity_scaled(
    low: &ViscosityField,
    r: &[f64],
    n: &[f64],
    scales: &[f64],
) -> ViscosityField {
    let ratio: Vec<f64> = r
        .iter()
        .zip(n)
        .map(|(&ri, &ni)| ri.max(0.0) * ni / (ni * ni + NORMALIZATION_EPS))
        .collect();
    let axes = low
        .axes
        .iter()
        .zip(scales)
        .map(|(l, s)| {
            l.iter()
                .zip(&ratio)
                .map(|(&li, &q)| li.min(s * s * q))
                .collect()
        })
        .collect();
    ViscosityField {
        axes,
        physical_dims: low.physical_dims,
    }
}

/// High-order viscosity with the anisotropic scales `h_a / k`.
pub fn high_order_viscosity(low: &ViscosityField, r: &[f64], n: &[f64], mesh: &TensorMesh) -> ViscosityField {
    high_order_viscosity_scaled(low, r, n, &length_scales(mesh, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Component;
    use crate::mesh::AxisSpec;

    fn vp_mesh(k: usize, nx: usize, nv: usize) -> TensorMesh {
        TensorMesh::phase_space(
            AxisSpec::periodic(0.0, 4.0 * std::f64::consts::PI, nx),
            AxisSpec::periodic(-6.0, 6.0, nv),
            k,
        )
        .unwrap()
    }

    #[test]
    fn constant_field_gives_half_h_beta() {
        let mesh = vp_mesh(1, 8, 12);
        let visc = low_order_viscosity(&mesh, &AdvectionField::constant(&[2.0, -0.5]));
        let (h1, h2) = (mesh.element_size(0), mesh.element_size(1));
        assert!(visc.eps_x()[0].iter().all(|&e| (e - h1).abs() < 1e-15));
        assert!(visc.eps_v()[0].iter().all(|&e| (e - 0.25 * h2).abs() < 1e-15));
    }

    #[test]
    fn vlasov_patch_max_of_speed() {
        let k = 2;
        let mesh = vp_mesh(k, 6, 48);
        let e = vec![0.0; mesh.nodes_per_axis()[0]];
        let visc = low_order_viscosity(&mesh, &AdvectionField::vlasov(&mesh, &[e]));
        assert!(visc.eps_v()[0].iter().all(|&v| v == 0.0));
        // v-node just below the top of the periodic axis: its patch reaches v = 6.
        let nv = mesh.nodes_per_axis()[1];
        let l = mesh.node_index(&[3, nv - 1]);
        let expect = 0.5 * mesh.element_size(0) / k as f64 * 6.0;
        assert!((visc.eps_x()[0][l] - expect).abs() < 1e-14);
    }

    #[test]
    fn isotropic_uses_smallest_spacing() {
        let mesh = build(&[(0.0, 4.0, 4), (0.0, 1.0, 8)], 1);
        let visc = isotropic_viscosity(&mesh, &AdvectionField::constant(&[1.0, 0.0]));
        let h2 = mesh.element_size(1);
        for ax in 0..2 {
            assert!(visc.axes()[ax].iter().all(|&e| (e - 0.5 * h2).abs() < 1e-15));
        }
        let zero = isotropic_viscosity(&mesh, &AdvectionField::constant(&[0.0, 0.0]));
        assert!(zero.is_zero());
    }

    fn build(axes: &[(f64, f64, usize)], k: usize) -> TensorMesh {
        let specs: Vec<AxisSpec> = axes.iter().map(|&(a, b, n)| AxisSpec::periodic(a, b, n)).collect();
        crate::mesh::build_mesh(&specs, k).unwrap()
    }

    #[test]
    fn patch_max_matches_brute_force() {
        let mesh = build(&[(0.0, 1.0, 3), (0.0, 1.0, 4)], 2);
        let vals: Vec<f64> = (0..mesh.n_nodes()).map(|i| ((i * 37) % 11) as f64).collect();
        let fast = patch_max(&mesh, &vals);
        for i in 0..mesh.n_nodes() {
            let brute = mesh
                .node_patch(i)
                .members
                .iter()
                .map(|&j| vals[j])
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(fast[i], brute);
        }
    }

    #[test]
    fn indicator_spike_and_constant() {
        let mesh = build(&[(0.0, 1.0, 5), (0.0, 1.0, 5)], 1);
        let mut f = vec![1.0; mesh.n_nodes()];
        assert!(discontinuity_indicator(&mesh, &f).iter().all(|&a| a == 0.0));
        let spike = mesh.node_index(&[2, 2]);
        f[spike] = 3.0;
        let alpha = discontinuity_indicator(&mesh, &f);
        assert_eq!(alpha[spike], 1.0);
        assert_eq!(alpha[mesh.node_index(&[0, 0])], 0.0);
        let disc = Discretization::new(&mesh).unwrap();
        let n = normalization(&disc, &f);
        let mean = disc.integrate(&f) / mesh.volume();
        let dev: Vec<f64> = f.iter().map(|v| v - mean).collect();
        let norm = disc.inner(&dev, &dev).sqrt();
        assert!((n[spike] - 0.5 * norm).abs() < 1e-15);
    }

    #[test]
    fn high_order_limits() {
        let mesh = vp_mesh(1, 4, 4);
        let low = low_order_viscosity(&mesh, &AdvectionField::constant(&[1.0, 1.0]));
        let n = vec![1.0; mesh.n_nodes()];
        let zero = high_order_viscosity(&low, &vec![0.0; mesh.n_nodes()], &n, &mesh);
        assert!(zero.is_zero());
        let huge = high_order_viscosity(&low, &vec![1e30; mesh.n_nodes()], &n, &mesh);
        assert_eq!(huge, low);
        let neg = high_order_viscosity(&low, &vec![-1.0; mesh.n_nodes()], &n, &mesh);
        assert!(neg.is_zero());
    }

    #[test]
    fn bdf_formulas() {
        let t = [0.0, 0.1, 0.2];
        let quad = |t: f64| 1.0 + 2.0 * t + 3.0 * t * t;
        let d = bdf_derivative(&[quad(t[2])], &[quad(t[1])], Some(&[quad(t[0])]), 0.1, 0.1, 0.1);
        assert!((d[0] - (2.0 + 6.0 * 0.2)).abs() < 1e-12);
        // Variable step: exact for quadratics.
        let (ta, tb, tc) = (0.0, 0.1, 0.205);
        let d = bdf_derivative(&[quad(tc)], &[quad(tb)], Some(&[quad(ta)]), tc - tb, tb - ta, 0.1);
        assert!((d[0] - (2.0 + 6.0 * tc)).abs() < 1e-11);
        // Ratio too large: first order.
        let d = bdf_derivative(&[2.0], &[1.0], Some(&[0.0]), 0.5, 0.1, 0.1);
        assert_eq!(d[0], 2.0);
    }

    #[test]
    fn residual_vanishes_for_steady_state() {
        let mesh = vp_mesh(2, 6, 8);
        let disc = Discretization::new(&mesh).unwrap();
        let f: Vec<f64> = (0..mesh.n_nodes())
            .map(|l| {
                let v = mesh.node_coords(l)[1];
                (-v * v / 2.0).exp()
            })
            .collect();
        let beta = AdvectionField::new(vec![Component::Coordinate(1), Component::Zero]);
        let ctx = ResidualContext {
            f_now: &f,
            f_prev1: &f,
            f_prev2: Some(&f),
            dt_now: 0.1,
            dt_prev: 0.1,
            beta: &beta,
        };
        let r = compute_residual(&ctx, &disc).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }
}

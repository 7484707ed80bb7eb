//! Time stepping: CFL step size, the forward Euler building block with a
//! consistent (or lumped) mass matrix, and the five-stage fourth-order SSP
//! Runge–Kutta driver with per-stage field refresh and per-step viscosity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{AdvectionField, AdvectionOperator, CsrMatrix, Discretization};
use crate::mesh::TensorMesh;
use crate::linsolve::SolveOptions;
use crate::poisson::{ElectrostaticState, PoissonSolver};
use crate::reduction::charge_density;
use crate::stabilization::{
    bdf_derivative, high_order_viscosity_scaled, isotropic_viscosity, length_scales,
    low_order_viscosity, normalization, Bootstrap, ResidualSmoother, StabilizationMode,
    ViscosityField,
};

/// Explicit Runge–Kutta scheme in Shu–Osher form:
/// `u⁽ⁱ⁾ = Σ_{j<i} (α_ij u⁽ʲ⁾ + β_ij Δt L(u⁽ʲ⁾))`, `u⁽⁰⁾ = uⁿ`, `uⁿ⁺¹ = u⁽ˢ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct SspTableau {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl SspTableau {
    /// Five-stage, fourth-order strong-stability-preserving scheme.
    pub fn ssprk54() -> Self {
        let alpha = vec![
            vec![1.0],
            vec![0.444370493651235, 0.555629506348765],
            vec![0.620101851488403, 0.0, 0.379898148511597],
            vec![0.178079954393132, 0.0, 0.0, 0.821920045606868],
            vec![0.0, 0.0, 0.517231671970585, 0.096059710526147, 0.386708617503269],
        ];
        let beta = vec![
            vec![0.391752226571890],
            vec![0.0, 0.368410593050371],
            vec![0.0, 0.0, 0.251891774271694],
            vec![0.0, 0.0, 0.0, 0.544974750228521],
            vec![0.0, 0.0, 0.0, 0.063692468666290, 0.226007483236906],
        ];
        Self { alpha, beta }
    }

    /// Forward Euler.
    pub fn euler() -> Self {
        Self {
            alpha: vec![vec![1.0]],
            beta: vec![vec![1.0]],
        }
    }

    pub fn stages(&self) -> usize {
        self.alpha.len()
    }

    /// Equivalent Butcher coefficients `(A, b, c)`.
    pub fn butcher(&self) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let s = self.stages();
        // coeff[i][j]: weight of Δt k_j in u⁽ⁱ⁾ − uⁿ.
        let mut coeff = vec![vec![0.0; s]; s + 1];
        for i in 1..=s {
            let mut row = vec![0.0; s];
            for j in 0..i {
                let (a, b) = (self.alpha[i - 1][j], self.beta[i - 1][j]);
                for (r, c) in row.iter_mut().zip(&coeff[j]) {
                    *r += a * c;
                }
                row[j] += b;
            }
            coeff[i] = row;
        }
        let a: Vec<Vec<f64>> = coeff[..s].to_vec();
        let c = a.iter().map(|r| r.iter().sum()).collect();
        (a, coeff[s].clone(), c)
    }

    /// Largest CFL coefficient `min α_ij / β_ij` over the Euler substeps.
    pub fn ssp_coefficient(&self) -> f64 {
        let mut c = f64::INFINITY;
        for (ar, br) in self.alpha.iter().zip(&self.beta) {
            for (&a, &b) in ar.iter().zip(br) {
                if b > 0.0 {
                    c = c.min(a / b);
                }
            }
        }
        c
    }
}

/// Advances `u` by one step of `tab` for the autonomous system `u' = L(u)`.
pub fn ssp_step<F>(tab: &SspTableau, u: &[f64], dt: f64, mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    let s = tab.stages();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(s + 1);
    let mut derivs: Vec<Option<Vec<f64>>> = vec![None; s];
    stages.push(u.to_vec());
    for i in 1..=s {
        let mut next = vec![0.0; u.len()];
        for j in 0..i {
            let (a, b) = (tab.alpha[i - 1][j], tab.beta[i - 1][j]);
            if a != 0.0 {
                next.iter_mut().zip(&stages[j]).for_each(|(n, x)| *n += a * x);
            }
            if b != 0.0 {
                if derivs[j].is_none() {
                    derivs[j] = Some(rhs(j, &stages[j])?);
                }
                let d = derivs[j].as_ref().expect("stage derivative");
                next.iter_mut().zip(d).for_each(|(n, x)| *n += b * dt * x);
            }
        }
        stages.push(next);
    }
    Ok(stages.pop().expect("final stage"))
}

/// `Δt = CFL · (Σ_a h_a²)^{1/2} / (k ‖β‖_∞)`.
pub fn cfl_dt(mesh: &TensorMesh, beta: &AdvectionField, cfl: f64) -> Result<f64> {
    cfl_dt_from_speed(mesh, beta.max_norm(mesh), cfl)
}

pub fn cfl_dt_from_speed(mesh: &TensorMesh, speed: f64, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0) {
        return Err(Error::Config(format!("CFL number must be positive, got {cfl}")));
    }
    if !(speed > 0.0) {
        return Err(Error::ZeroField);
    }
    let h2: f64 = (0..mesh.dim()).map(|ax| mesh.element_size(ax).powi(2)).sum();
    Ok(cfl * h2.sqrt() / (mesh.degree() as f64 * speed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassTreatment {
    Consistent,
    Lumped,
}

impl FromStr for MassTreatment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "consistent" => Ok(Self::Consistent),
            "lumped" => Ok(Self::Lumped),
            other => Err(Error::Config(format!("unknown mass treatment `{other}`"))),
        }
    }
}

impl fmt::Display for MassTreatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Consistent => "consistent",
            Self::Lumped => "lumped",
        })
    }
}

/// `L(u) = −M⁻¹ (C + D) u`.
pub fn semi_discrete_rhs(
    disc: &Discretization,
    u: &[f64],
    advection: &AdvectionOperator,
    diffusion: Option<&CsrMatrix>,
    mass: MassTreatment,
) -> Vec<f64> {
    let mut r = vec![0.0; u.len()];
    advection.apply(u, &mut r);
    if let Some(d) = diffusion {
        d.matvec_add(1.0, u, &mut r);
    }
    r.iter_mut().for_each(|v| *v = -*v);
    match mass {
        MassTreatment::Consistent => disc.solve_mass(&mut r),
        MassTreatment::Lumped => r
            .iter_mut()
            .zip(disc.lumped_mass())
            .for_each(|(v, m)| *v /= m),
    }
    r
}

/// One forward Euler step `f − Δt M⁻¹ (C + D) f`.
pub fn euler_stage(
    disc: &Discretization,
    f: &[f64],
    advection: &AdvectionOperator,
    diffusion: Option<&CsrMatrix>,
    dt: f64,
    mass: MassTreatment,
) -> Vec<f64> {
    let d = semi_discrete_rhs(disc, f, advection, diffusion, mass);
    f.iter().zip(&d).map(|(a, b)| a + dt * b).collect()
}

/// Which transport problem is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `∂_t f + v ∂_x f + E ∂_v f = 0` on a phase-space mesh.
    VlasovPoisson,
    /// `∂_t ρ + E^⊥ · ∇ρ = 0` on a planar periodic mesh.
    GuidingCenter,
}

/// False once the discrete l² norm overflows, which precedes NaN in the solves.
fn finite_energy(u: &[f64]) -> bool {
    u.iter().map(|v| v * v).sum::<f64>().is_finite()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: StabilizationMode,
    pub bootstrap: Bootstrap,
    pub cfl: f64,
    pub mass: MassTreatment,
    /// Largest relative step change for which the second-order BDF is used.
    pub bdf_ratio_tol: f64,
    /// Assemble the advection matrix instead of applying its tensor factors.
    pub assembled_advection: bool,
    pub poisson_solve: SolveOptions,
    pub smoother_solve: SolveOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: StabilizationMode::Rv,
            bootstrap: Bootstrap::SemiDiscrete,
            cfl: 0.4,
            mass: MassTreatment::Consistent,
            bdf_ratio_tol: 0.1,
            assembled_advection: false,
            poisson_solve: SolveOptions {
                tol: 1e-12,
                max_iter: 20_000,
            },
            smoother_solve: SolveOptions {
                tol: 1e-10,
                max_iter: 500,
            },
        }
    }
}

/// Current solution, up to two previous accepted levels and the coupled fields.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub time: f64,
    pub step: usize,
    pub f_now: Vec<f64>,
    pub f_prev1: Option<Vec<f64>>,
    pub f_prev2: Option<Vec<f64>>,
    /// `t_n − t_{n−1}`
    pub dt_now: f64,
    /// `t_{n−1} − t_{n−2}`
    pub dt_prev: f64,
    pub electrostatics: ElectrostaticState,
    /// Viscosity used by the most recent step.
    pub viscosity: ViscosityField,
}

/// Owns the discretization, operators and state of one simulation.
#[derive(Debug, Clone)]
pub struct Solver {
    model: ModelKind,
    config: SolverConfig,
    disc: Discretization,
    poisson: PoissonSolver,
    smoother: Option<ResidualSmoother>,
    diffusion: CsrMatrix,
    tableau: SspTableau,
    state: SimulationState,
}

impl Solver {
    pub fn new(model: ModelKind, mesh: &TensorMesh, f0: Vec<f64>, config: SolverConfig) -> Result<Self> {
        if f0.len() != mesh.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_nodes(),
                got: f0.len(),
            });
        }
        let poisson = match model {
            ModelKind::VlasovPoisson => {
                if mesh.physical_dims() != 1 || mesh.velocity_dims() != 1 {
                    return Err(Error::InvalidAxis("Vlasov–Poisson needs a 1D1V mesh".into()));
                }
                PoissonSolver::new(&mesh.physical_mesh()?)?.with_options(config.poisson_solve)
            }
            ModelKind::GuidingCenter => {
                if mesh.velocity_dims() != 0 || mesh.dim() != 2 {
                    return Err(Error::InvalidAxis("guiding-center needs a 2D physical mesh".into()));
                }
                PoissonSolver::new(mesh)?.with_options(config.poisson_solve)
            }
        };
        let disc = Discretization::new(mesh)?;
        let smoother = match config.mode {
            StabilizationMode::Rv | StabilizationMode::RvIsotropic => {
                Some(ResidualSmoother::new(&disc)?.with_options(config.smoother_solve))
            }
            _ => None,
        };
        let diffusion = disc.assembler().zeros();
        let electrostatics = Self::fields_for(model, &poisson, mesh, &f0)?;
        let state = SimulationState {
            time: 0.0,
            step: 0,
            f_now: f0,
            f_prev1: None,
            f_prev2: None,
            dt_now: 0.0,
            dt_prev: 0.0,
            electrostatics,
            viscosity: ViscosityField::zeros(mesh),
        };
        Ok(Self {
            model,
            config,
            disc,
            poisson,
            smoother,
            diffusion,
            tableau: SspTableau::ssprk54(),
            state,
        })
    }

    pub fn with_tableau(mut self, tableau: SspTableau) -> Self {
        self.tableau = tableau;
        self
    }

    fn fields_for(
        model: ModelKind,
        poisson: &PoissonSolver,
        mesh: &TensorMesh,
        f: &[f64],
    ) -> Result<ElectrostaticState> {
        match model {
            ModelKind::VlasovPoisson => poisson.solve(&charge_density(f, mesh)?),
            ModelKind::GuidingCenter => poisson.solve(f),
        }
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn mesh(&self) -> &TensorMesh {
        self.disc.mesh()
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn solution(&self) -> &[f64] {
        &self.state.f_now
    }

    /// Replaces the solution, keeping the clock but discarding the history.
    pub fn restart_with(&mut self, f: Vec<f64>) -> Result<()> {
        if f.len() != self.mesh().n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.mesh().n_nodes(),
                got: f.len(),
            });
        }
        self.state.electrostatics = Self::fields_for(self.model, &self.poisson, self.mesh(), &f)?;
        self.state.f_now = f;
        self.state.f_prev1 = None;
        self.state.f_prev2 = None;
        self.state.dt_now = 0.0;
        self.state.dt_prev = 0.0;
        Ok(())
    }

    /// Transport field `β` for given electrostatics.
    pub fn advection_field(&self, es: &ElectrostaticState) -> AdvectionField {
        match self.model {
            ModelKind::VlasovPoisson => AdvectionField::vlasov(self.mesh(), &es.efield),
            ModelKind::GuidingCenter => AdvectionField::guiding_center(&es.efield),
        }
    }

    fn advection_operator(&self, beta: &AdvectionField) -> AdvectionOperator {
        if self.config.assembled_advection {
            AdvectionOperator::Assembled(self.disc.assembler().advection(beta))
        } else {
            self.disc.advection_operator(beta)
        }
    }

    /// Viscosity for the step starting at the current level.
    pub fn compute_viscosity(&mut self, beta: &AdvectionField) -> Result<ViscosityField> {
        let mesh = self.disc.mesh();
        let mode = self.config.mode;
        match mode {
            StabilizationMode::None => return Ok(ViscosityField::zeros(mesh)),
            StabilizationMode::LowOrder => return Ok(low_order_viscosity(mesh, beta)),
            _ => {}
        }
        let low = if mode.is_isotropic() {
            isotropic_viscosity(mesh, beta)
        } else {
            low_order_viscosity(mesh, beta)
        };
        let st = &self.state;
        let dfdt = match (&st.f_prev1, &st.f_prev2, self.config.bootstrap) {
            (Some(_), None, Bootstrap::LowOrder) | (None, _, Bootstrap::LowOrder) => return Ok(low),
            (Some(p1), p2, _) => bdf_derivative(
                &st.f_now,
                p1,
                p2.as_deref(),
                st.dt_now,
                st.dt_prev,
                self.config.bdf_ratio_tol,
            ),
            (None, _, Bootstrap::SemiDiscrete) => {
                let adv = self.advection_operator(beta);
                semi_discrete_rhs(&self.disc, &st.f_now, &adv, None, MassTreatment::Consistent)
            }
        };
        let smoother = self.smoother.as_mut().expect("residual smoother for RV modes");
        let r = smoother.residual(&self.disc, &dfdt, &self.state.f_now, beta)?;
        let n = normalization(&self.disc, &self.state.f_now);
        let scales = length_scales(mesh, mode.is_isotropic());
        Ok(high_order_viscosity_scaled(&low, &r, &n, &scales))
    }

    /// CFL step for the current level.
    pub fn stable_dt(&self) -> Result<f64> {
        let beta = self.advection_field(&self.state.electrostatics);
        cfl_dt(self.mesh(), &beta, self.config.cfl)
    }

    fn non_finite(&self) -> Error {
        Error::NonFinite {
            step: self.state.step + 1,
            time: self.state.time,
        }
    }

    /// Takes one step of at most `dt_max`; returns the step size used.
    pub fn step(&mut self, dt_max: f64) -> Result<f64> {
        let beta = self.advection_field(&self.state.electrostatics);
        let speed = beta.max_norm(self.mesh());
        if !speed.is_finite() {
            return Err(self.non_finite());
        }
        let visc = self.compute_viscosity(&beta)?;
        let dt = cfl_dt_from_speed(self.mesh(), speed, self.config.cfl)?.min(dt_max);
        let has_diffusion = !visc.is_zero();
        if has_diffusion {
            self.disc
                .assembler()
                .diffusion_into(visc.axes(), &mut self.diffusion)?;
        }
        let stage0 = self.advection_operator(&beta);
        let f_new = {
            let this = &*self;
            let diffusion = has_diffusion.then_some(&this.diffusion);
            ssp_step(&this.tableau, &this.state.f_now, dt, |j, u| {
                let fresh;
                if !finite_energy(u) {
                    return Err(this.non_finite());
                }
                let adv = if j == 0 {
                    &stage0
                } else {
                    let es = Self::fields_for(this.model, &this.poisson, this.mesh(), u)?;
                    fresh = this.advection_operator(&this.advection_field(&es));
                    &fresh
                };
                Ok(semi_discrete_rhs(&this.disc, u, adv, diffusion, this.config.mass))
            })?
        };
        let st = &mut self.state;
        st.step += 1;
        st.time += dt;
        if !finite_energy(&f_new) {
            return Err(Error::NonFinite {
                step: st.step,
                time: st.time,
            });
        }
        st.f_prev2 = st.f_prev1.take();
        st.f_prev1 = Some(std::mem::replace(&mut st.f_now, f_new));
        st.dt_prev = st.dt_now;
        st.dt_now = dt;
        st.viscosity = visc;
        st.electrostatics = Self::fields_for(self.model, &self.poisson, self.disc.mesh(), &st.f_now)?;
        Ok(dt)
    }

    /// Steps until `t_end`, landing on it exactly. `observe` runs after every step.
    pub fn advance_to<F>(&mut self, t_end: f64, mut observe: F) -> Result<()>
    where
        F: FnMut(&Solver, f64) -> Result<()>,
    {
        let tiny = 1e-12 * t_end.abs().max(1.0);
        while t_end - self.state.time > tiny {
            let dt = self.step(t_end - self.state.time)?;
            observe(self, dt)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_rows_are_convex() {
        let t = SspTableau::ssprk54();
        for (a, b) in t.alpha.iter().zip(&t.beta) {
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(a.iter().chain(b).all(|&c| c >= 0.0));
        }
        assert!((t.ssp_coefficient() - 1.508).abs() < 1e-3);
    }

    #[test]
    fn euler_tableau_is_forward_euler() {
        let u = ssp_step(&SspTableau::euler(), &[2.0], 0.5, |_, u| Ok(vec![-u[0]])).unwrap();
        assert_eq!(u, vec![1.0]);
    }

    #[test]
    fn cfl_formula() {
        use crate::mesh::{build_mesh, AxisSpec};
        let mesh = build_mesh(
            &[AxisSpec::periodic(0.0, 1.0, 10), AxisSpec::periodic(0.0, 1.0, 10)],
            1,
        )
        .unwrap();
        let dt = cfl_dt_from_speed(&mesh, 6.0, 0.4).unwrap();
        assert!((dt - 0.4 * 0.02f64.sqrt() / 6.0).abs() < 1e-15);
        let mesh2 = build_mesh(
            &[AxisSpec::periodic(0.0, 1.0, 10), AxisSpec::periodic(0.0, 1.0, 10)],
            2,
        )
        .unwrap();
        assert!((cfl_dt_from_speed(&mesh2, 6.0, 0.4).unwrap() - dt / 2.0).abs() < 1e-15);
        assert!(matches!(cfl_dt_from_speed(&mesh, 0.0, 0.4), Err(Error::ZeroField)));
    }
}

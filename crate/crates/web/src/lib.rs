//! WebAssembly bindings for an interactive phase-space demo.

use wasm_bindgen::prelude::*;

use vlasov_fem::diagnostics::electric_energy_log;
use vlasov_fem::integrator::{Solver, SolverConfig};
use vlasov_fem::mesh::TensorMesh;
use vlasov_fem::scenarios::{Preset, Scenario};
use vlasov_fem::stabilization::StabilizationMode;

fn err(e: vlasov_fem::Error) -> String {
    e.to_string()
}

/// One running simulation on a small mesh.
#[wasm_bindgen]
pub struct Demo {
    scenario: Scenario,
    mesh: TensorMesh,
    solver: Solver,
    history: Vec<f64>,
}

#[wasm_bindgen]
impl Demo {
    /// Starts `preset` on an `elements × elements` Q`degree` mesh.
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str, elements: usize, degree: usize, mode: &str) -> Result<Demo, String> {
        let p: Preset = preset.parse().map_err(err)?;
        let mode: StabilizationMode = mode.parse().map_err(err)?;
        if !(2..=256).contains(&elements) {
            return Err(format!("elements per axis must lie in 2..=256, got {elements}"));
        }
        let scenario = Scenario::new(p);
        let mesh = scenario.mesh([elements, elements], degree).map_err(err)?;
        let config = SolverConfig {
            mode,
            ..SolverConfig::default()
        };
        let solver = scenario.solver(&mesh, config).map_err(err)?;
        let mut demo = Demo {
            scenario,
            mesh,
            solver,
            history: Vec::new(),
        };
        demo.record();
        Ok(demo)
    }

    fn record(&mut self) {
        let es = &self.solver.state().electrostatics;
        let ee = electric_energy_log(self.solver.poisson().field_energy(&es.efield));
        self.history.push(self.solver.time());
        self.history.push(ee);
    }

    /// Advances by `duration` and returns the new time.
    pub fn advance(&mut self, duration: f64) -> Result<f64, String> {
        if !(duration >= 0.0) {
            return Err("duration must be nonnegative".into());
        }
        let target = self.solver.time() + duration;
        self.solver.advance_to(target, |_, _| Ok(())).map_err(err)?;
        self.record();
        Ok(self.solver.time())
    }

    /// Adds a Gaussian blob of the given amplitude and width centred at `(x, y)`.
    pub fn perturb(&mut self, x: f64, y: f64, amplitude: f64, width: f64) -> Result<(), String> {
        if !(width > 0.0) {
            return Err("width must be positive".into());
        }
        let mut f = self.solver.solution().to_vec();
        let lengths: Vec<f64> = self.mesh.axes().iter().map(|a| a.length()).collect();
        for (l, v) in f.iter_mut().enumerate() {
            let c = self.mesh.node_coords(l);
            // Minimum-image distance on the periodic box.
            let d2: f64 = [c[0] - x, c[1] - y]
                .iter()
                .zip(&lengths)
                .map(|(d, len)| {
                    let d = d - len * (d / len).round();
                    d * d
                })
                .sum();
            *v += amplitude * (-0.5 * d2 / (width * width)).exp();
        }
        self.solver.restart_with(f).map_err(err)
    }

    pub fn time(&self) -> f64 {
        self.solver.time()
    }

    pub fn steps(&self) -> usize {
        self.solver.state().step
    }

    /// Nodes along the first axis.
    pub fn nx(&self) -> usize {
        self.mesh.nodes_per_axis()[0]
    }

    /// Nodes along the second axis.
    pub fn ny(&self) -> usize {
        self.mesh.nodes_per_axis()[1]
    }

    /// `[x_min, x_max, y_min, y_max]`
    pub fn bounds(&self) -> Vec<f64> {
        let [(a, b), (c, d)] = self.scenario.domain;
        vec![a, b, c, d]
    }

    /// Nodal values, first axis slowest.
    pub fn field(&self) -> Vec<f64> {
        self.solver.solution().to_vec()
    }

    /// Interleaved `(t, ln ‖E‖)` samples, one per `advance`.
    pub fn energy_history(&self) -> Vec<f64> {
        self.history.clone()
    }

    pub fn max_viscosity(&self) -> f64 {
        self.solver
            .state()
            .viscosity
            .max_per_axis()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Preset names accepted by [`Demo::new`].
#[wasm_bindgen]
pub fn presets() -> Vec<String> {
    Preset::ALL.iter().map(|p| p.name().to_string()).collect()
}

//! Benchmark presets, the forward–backward convergence protocol and
//! guiding-center helpers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{error_norms, error_vs_function, relative_error_vs_function, ErrorNorms};
use crate::error::{Error, Result};
use crate::fem::{evaluate_at, AdvectionField};
use crate::integrator::{ModelKind, Solver, SolverConfig};
use crate::mesh::{permute_field, AxisSpec, TensorMesh};
use crate::poisson::ElectrostaticState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Landau,
    TwoStream,
    #[serde(alias = "multivortex")]
    TwoStreamMultivortex,
    BumpOnTail,
    GuidingCenter,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Landau,
        Preset::TwoStream,
        Preset::TwoStreamMultivortex,
        Preset::BumpOnTail,
        Preset::GuidingCenter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Landau => "landau",
            Preset::TwoStream => "two_stream",
            Preset::TwoStreamMultivortex => "two_stream_multivortex",
            Preset::BumpOnTail => "bump_on_tail",
            Preset::GuidingCenter => "guiding_center",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Preset::Landau => "Landau damping of a perturbed Maxwellian",
            Preset::TwoStream => "two-stream instability from v² times a Maxwellian",
            Preset::TwoStreamMultivortex => "two counter-streaming Maxwellians forming several vortices",
            Preset::BumpOnTail => "Maxwellian with a high-velocity bump",
            Preset::GuidingCenter => "diocotron ring instability of the guiding-center model",
        }
    }

    pub fn model(self) -> ModelKind {
        match self {
            Preset::GuidingCenter => ModelKind::GuidingCenter,
            _ => ModelKind::VlasovPoisson,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "landau" => Ok(Preset::Landau),
            "two_stream" => Ok(Preset::TwoStream),
            "two_stream_multivortex" | "multivortex" => Ok(Preset::TwoStreamMultivortex),
            "bump_on_tail" => Ok(Preset::BumpOnTail),
            "guiding_center" => Ok(Preset::GuidingCenter),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

/// Parameters of one benchmark. Fields not used by a preset are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub preset: Preset,
    /// Perturbation amplitude.
    pub alpha: f64,
    /// Perturbation wave number (Vlasov presets).
    pub theta: f64,
    /// Beam drift speed (multivortex).
    pub drift: f64,
    /// Beam thermal speed (multivortex).
    pub thermal_speed: f64,
    /// Angular mode number (guiding center).
    pub mode: f64,
    /// Ring radii `(r⁻, r⁺)` (guiding center).
    pub ring: (f64, f64),
    /// Domain `[min, max]` of the first and second axis.
    pub domain: [(f64, f64); 2],
    pub final_time: f64,
    pub snapshot_times: Vec<f64>,
    /// Elements per axis of the default run.
    pub elements: [usize; 2],
    pub degree: usize,
    /// Elements per axis of the full-resolution runs.
    pub full_scale_elements: [usize; 2],
}

impl Scenario {
    pub fn new(preset: Preset) -> Self {
        let base = Scenario {
            preset,
            alpha: 0.01,
            theta: 0.5,
            drift: 0.0,
            thermal_speed: 1.0,
            mode: 0.0,
            ring: (0.0, 0.0),
            domain: [(0.0, 4.0 * PI), (-6.0, 6.0)],
            final_time: 60.0,
            snapshot_times: Vec::new(),
            elements: [48, 48],
            degree: 1,
            full_scale_elements: [384, 768],
        };
        match preset {
            Preset::Landau => base,
            Preset::TwoStream => Scenario {
                domain: [(0.0, 4.0 * PI), (-5.0, 5.0)],
                final_time: 30.0,
                snapshot_times: vec![0.0, 12.0, 18.0, 21.0, 24.0, 30.0],
                elements: [32, 64],
                degree: 3,
                full_scale_elements: [128, 256],
                ..base
            },
            Preset::TwoStreamMultivortex => Scenario {
                alpha: 0.05,
                theta: 2.0 / 13.0,
                drift: 0.99,
                thermal_speed: 0.3,
                domain: [(0.0, 13.0 * PI), (-5.0, 5.0)],
                final_time: 400.0,
                snapshot_times: vec![0.0, 40.0, 50.0, 70.0, 200.0, 400.0],
                elements: [32, 64],
                degree: 3,
                full_scale_elements: [128, 256],
                ..base
            },
            Preset::BumpOnTail => Scenario {
                alpha: 0.04,
                theta: 0.3,
                domain: [(0.0, 20.0 * PI), (-8.0, 8.0)],
                final_time: 400.0,
                snapshot_times: vec![18.0, 30.0, 50.0, 100.0, 200.0, 400.0],
                elements: [32, 64],
                degree: 3,
                full_scale_elements: [128, 256],
                ..base
            },
            Preset::GuidingCenter => Scenario {
                alpha: 0.1,
                theta: 0.0,
                mode: 6.0,
                ring: (5.0, 8.0),
                domain: [(-15.0, 15.0), (-15.0, 15.0)],
                final_time: 500.0,
                snapshot_times: vec![0.0, 25.0, 50.0, 100.0, 200.0, 500.0],
                elements: [64, 64],
                degree: 1,
                full_scale_elements: [128, 128],
                ..base
            },
        }
    }

    pub fn model(&self) -> ModelKind {
        self.preset.model()
    }

    /// Closed-form initial datum at a point `(x, v)` or `(x₁, x₂)`.
    pub fn initial_value(&self, p: &[f64]) -> f64 {
        let (x, v) = (p[0], p[1]);
        let gauss = |v: f64| (-0.5 * v * v).exp() / (2.0 * PI).sqrt();
        let perturbation = 1.0 + self.alpha * (self.theta * x).cos();
        match self.preset {
            Preset::Landau => gauss(v) * perturbation,
            Preset::TwoStream => v * v * gauss(v) * perturbation,
            Preset::TwoStreamMultivortex => {
                let vt = self.thermal_speed;
                let beam = |c: f64| (-(v - c).powi(2) / (2.0 * vt * vt)).exp();
                (beam(self.drift) + beam(-self.drift)) / (2.0 * vt * (2.0 * PI).sqrt()) * perturbation
            }
            Preset::BumpOnTail => {
                let d0 = (0.9 * (-0.5 * v * v).exp() + 0.2 * (-2.0 * (v - 4.5).powi(2)).exp())
                    / (2.0 * PI).sqrt();
                d0 * perturbation
            }
            Preset::GuidingCenter => {
                let r = x.hypot(v);
                if r < self.ring.0 || r > self.ring.1 {
                    0.0
                } else {
                    let angle = v.atan2(x);
                    (1.0 + self.alpha * (self.mode * angle).cos()) * (-4.0 * (r - 6.5).powi(2)).exp()
                }
            }
        }
    }

    /// Periodic tensor mesh over the preset domain.
    pub fn mesh(&self, elements: [usize; 2], degree: usize) -> Result<TensorMesh> {
        let [(x0, x1), (v0, v1)] = self.domain;
        let a = AxisSpec::periodic(x0, x1, elements[0]);
        let b = AxisSpec::periodic(v0, v1, elements[1]);
        match self.model() {
            ModelKind::VlasovPoisson => TensorMesh::phase_space(a, b, degree),
            ModelKind::GuidingCenter => TensorMesh::new(vec![a, b], degree, 2),
        }
    }

    pub fn default_mesh(&self) -> Result<TensorMesh> {
        self.mesh(self.elements, self.degree)
    }

    /// Nodal interpolation of the initial datum.
    pub fn initial_field(&self, mesh: &TensorMesh) -> Result<Vec<f64>> {
        if mesh.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: mesh.dim(),
            });
        }
        Ok((0..mesh.n_nodes())
            .map(|l| self.initial_value(&mesh.node_coords(l)[..2]))
            .collect())
    }

    pub fn solver(&self, mesh: &TensorMesh, config: SolverConfig) -> Result<Solver> {
        Solver::new(self.model(), mesh, self.initial_field(mesh)?, config)
    }
}

/// Looks up a preset by name and returns its default parameters.
pub fn preset(name: &str) -> Result<Scenario> {
    Ok(Scenario::new(name.parse()?))
}

/// Nodal interpolation of a named preset.
pub fn initial_field(name: &str, mesh: &TensorMesh) -> Result<Vec<f64>> {
    preset(name)?.initial_field(mesh)
}

/// Elements per axis giving `nodes` nodes per axis in the inclusive
/// convention `nodes = k · elements + 1`.
pub fn elements_for_nodes(nodes: usize, degree: usize) -> Result<usize> {
    if nodes < 2 || (nodes - 1) % degree != 0 {
        return Err(Error::Config(format!(
            "{nodes} nodes per axis do not fit Q{degree} elements"
        )));
    }
    Ok((nodes - 1) / degree)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBackward {
    pub final_field: Vec<f64>,
    /// Nodal interpolant of the reflected initial datum.
    pub reference: Vec<f64>,
    /// Error against the closed-form reflected datum, each norm relative
    /// to the same norm of the datum.
    pub errors: ErrorNorms,
    /// Absolute error against the closed-form reflected datum.
    pub absolute_errors: ErrorNorms,
    /// Error against its nodal interpolant.
    pub nodal_errors: ErrorNorms,
    pub steps: usize,
}

/// Runs to `T`, reflects `v ↦ −v`, runs another `T` and compares with the
/// reflected initial datum.
pub fn forward_backward_protocol(
    scenario: &Scenario,
    t_half: f64,
    mesh: &TensorMesh,
    config: SolverConfig,
) -> Result<ForwardBackward> {
    if scenario.model() != ModelKind::VlasovPoisson {
        return Err(Error::Config("forward-backward protocol needs a Vlasov preset".into()));
    }
    let perm = mesh.reflect_velocity_map()?;
    let f0 = scenario.initial_field(mesh)?;
    let reference = permute_field(&f0, &perm);
    let mut solver = Solver::new(ModelKind::VlasovPoisson, mesh, f0, config)?;
    solver.advance_to(t_half, |_, _| Ok(()))?;
    let reflected = permute_field(solver.solution(), &perm);
    solver.restart_with(reflected)?;
    solver.advance_to(2.0 * t_half, |_, _| Ok(()))?;
    let final_field = solver.solution().to_vec();
    let nodal_errors = error_norms(&final_field, &reference, mesh)?;
    let exact = |p: &[f64]| scenario.initial_value(&[p[0], -p[1]]);
    let errors = relative_error_vs_function(&final_field, mesh, exact)?;
    let absolute_errors = error_vs_function(&final_field, mesh, exact)?;
    Ok(ForwardBackward {
        final_field,
        reference,
        errors,
        absolute_errors,
        nodal_errors,
        steps: solver.state().step,
    })
}

/// Transport field `E^⊥ = (E₂, −E₁)` of the guiding-center model.
pub fn guiding_center_rhs(state: &ElectrostaticState) -> AdvectionField {
    AdvectionField::guiding_center(&state.efield)
}

/// Angular profile `max_{r⁻ ≤ r ≤ r⁺} ρ(r, φ)` sampled at `samples` angles.
pub fn ring_profile(mesh: &TensorMesh, rho: &[f64], radii: (f64, f64), samples: usize) -> Vec<f64> {
    let radial = 32;
    (0..samples)
        .map(|s| {
            let phi = 2.0 * PI * s as f64 / samples as f64;
            (0..=radial)
                .map(|j| {
                    let r = radii.0 + (radii.1 - radii.0) * j as f64 / radial as f64;
                    evaluate_at(mesh, rho, &[r * phi.cos(), r * phi.sin()])
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Number of distinct lobes of a periodic profile: arcs above the mid level,
/// with a hysteresis band of `band` times the range.
pub fn count_lobes(profile: &[f64], band: f64) -> usize {
    let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if profile.is_empty() || !(range > 0.0) {
        return 0;
    }
    let mid = 0.5 * (lo + hi);
    let (up, down) = (mid + band * range, mid - band * range);
    // Start from the global minimum so that the first arc is not split.
    let start = profile.iter().position(|&p| p == lo).unwrap_or(0);
    let mut above = false;
    let mut count = 0;
    for i in 0..profile.len() {
        let p = profile[(start + i) % profile.len()];
        if !above && p > up {
            above = true;
            count += 1;
        } else if above && p < down {
            above = false;
        }
    }
    count
}

/// Vortices of a guiding-center density located on the initial ring band.
pub fn count_vortices(scenario: &Scenario, mesh: &TensorMesh, rho: &[f64]) -> usize {
    let (r0, r1) = scenario.ring;
    count_lobes(&ring_profile(mesh, rho, (r0 - 2.0, r1 + 2.0), 720), 0.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!("multivortex".parse::<Preset>().unwrap(), Preset::TwoStreamMultivortex);
        assert!(matches!("kelvin".parse::<Preset>(), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn lobes_of_cosine() {
        let prof: Vec<f64> = (0..360).map(|i| (6.0 * (i as f64).to_radians()).cos()).collect();
        assert_eq!(count_lobes(&prof, 0.1), 6);
        let flat = vec![1.0; 10];
        assert_eq!(count_lobes(&flat, 0.1), 0);
    }

    #[test]
    fn node_convention() {
        assert_eq!(elements_for_nodes(121, 3).unwrap(), 40);
        assert_eq!(elements_for_nodes(31, 1).unwrap(), 30);
        assert!(elements_for_nodes(31, 4).is_err());
    }
}

//! End-to-end runs: time stepping with series and snapshot output, and the
//! forward–backward convergence study.

use std::path::PathBuf;
use std::time::Instant;

use crate::config::{render_sections, RunConfig};
use crate::diagnostics::{electric_energy_log, SeriesRow};
use crate::error::{Error, Result};
use crate::integrator::{ModelKind, Solver};
use crate::output::{attach_rates, convergence_csv, write_snapshot, ConvergenceRow, SeriesWriter, SnapshotFiles};
use crate::reduction::MomentWeights;
use crate::scenarios::{elements_for_nodes, forward_backward_protocol};

/// Evaluates series rows for one solver.
pub struct SeriesProbe {
    weights: Option<MomentWeights>,
}

impl SeriesProbe {
    pub fn new(solver: &Solver) -> Result<Self> {
        let weights = match solver.model() {
            ModelKind::VlasovPoisson => Some(MomentWeights::new(solver.mesh())?),
            ModelKind::GuidingCenter => None,
        };
        Ok(Self { weights })
    }

    /// Row for the solver's current level; `dt` is the step just taken.
    pub fn row(&self, solver: &Solver, dt: f64) -> SeriesRow {
        let st = solver.state();
        let f = &st.f_now;
        let (mass, momentum, kinetic, l2sq) = match &self.weights {
            Some(w) => {
                let m = w.moments(f);
                (m.mass, m.momentum, m.kinetic_energy, m.l2norm_sq)
            }
            None => {
                let d = solver.discretization();
                (d.integrate(f), 0.0, 0.0, d.inner(f, f))
            }
        };
        let field = solver.poisson().field_energy(&st.electrostatics.efield);
        let max = |axes: &[Vec<f64>]| axes.iter().flatten().copied().fold(0.0, f64::max);
        SeriesRow {
            t: st.time,
            dt,
            mass,
            momentum,
            kinetic_energy: kinetic,
            electric_energy: 0.5 * field,
            total_energy: kinetic + 0.5 * field,
            l2norm: l2sq.max(0.0).sqrt(),
            ee_log: electric_energy_log(field),
            max_eps_x: max(st.viscosity.eps_x()),
            max_eps_v: max(st.viscosity.eps_v()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub wall_seconds: f64,
    pub rows: usize,
    pub max_mass_deviation: f64,
    pub series: PathBuf,
    pub manifest: PathBuf,
    pub snapshots: Vec<SnapshotFiles>,
}

fn snapshot_stem(quantity: &str, t: f64) -> String {
    format!("{quantity}_t{t:010.4}")
}

/// Runs a configuration, writing `series.csv`, snapshots and `manifest.ini`
/// into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let scenario = cfg.scenario();
    let mesh = scenario.default_mesh()?;
    let mut solver = scenario.solver(&mesh, cfg.solver_config())?;
    let quantity = match solver.model() {
        ModelKind::VlasovPoisson => "f",
        ModelKind::GuidingCenter => "rho",
    };
    let probe = SeriesProbe::new(&solver)?;
    let series_path = dir.join("series.csv");
    let mut writer = SeriesWriter::create(&series_path)?;

    let first = probe.row(&solver, 0.0);
    let mass0 = first.mass;
    let mut max_dev: f64 = 0.0;
    writer.write(&first)?;
    let mut rows = 1;

    let mut snaps: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t <= cfg.final_time)
        .collect();
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    let mut targets = snaps.clone();
    targets.push(cfg.final_time);
    targets.dedup();

    let mut snapshots = Vec::new();
    let interval = cfg.series_interval;
    let mut next_sample = interval;
    for target in targets {
        let is_final = target == cfg.final_time;
        solver.advance_to(target, |s, dt| {
            let t = s.time();
            let landed = (t - cfg.final_time).abs() <= 1e-12 * cfg.final_time.max(1.0);
            if interval == 0.0 || t >= next_sample * (1.0 - 1e-12) || (is_final && landed) {
                let row = probe.row(s, dt);
                if mass0 != 0.0 {
                    max_dev = max_dev.max(((row.mass - mass0) / mass0).abs());
                }
                writer.write(&row)?;
                rows += 1;
                while interval > 0.0 && next_sample <= t * (1.0 + 1e-12) {
                    next_sample += interval;
                }
            }
            Ok(())
        })?;
        if snaps.contains(&target) {
            snapshots.push(write_snapshot(
                dir,
                &snapshot_stem(quantity, target),
                &mesh,
                solver.solution(),
                quantity,
                solver.time(),
                solver.state().step,
                cfg.vtk,
            )?);
        }
    }
    writer.finish()?;

    let wall = start.elapsed().as_secs_f64();
    let mut entries = cfg.entries();
    let info = [
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("model", format!("{:?}", solver.model())),
        ("nodes", format!("{:?}", mesh.nodes_per_axis())),
        ("n_nodes", mesh.n_nodes().to_string()),
        ("n_elements", mesh.n_elements().to_string()),
        ("steps", solver.state().step.to_string()),
        ("final_time", solver.time().to_string()),
        ("series_rows", rows.to_string()),
        ("max_mass_deviation", format!("{max_dev:e}")),
        ("wall_seconds", format!("{wall:.3}")),
    ];
    entries.extend(info.iter().map(|(k, v)| (format!("manifest.{k}"), v.clone())));
    let manifest = dir.join("manifest.ini");
    std::fs::write(&manifest, render_sections(&entries))?;

    Ok(RunSummary {
        steps: solver.state().step,
        final_time: solver.time(),
        wall_seconds: wall,
        rows,
        max_mass_deviation: max_dev,
        series: series_path,
        manifest,
        snapshots,
    })
}

/// Forward–backward study over every configured mode, degree and grid.
/// `progress` is called after each completed resolution.
pub fn convergence<F>(cfg: &RunConfig, mut progress: F) -> Result<Vec<ConvergenceRow>>
where
    F: FnMut(&ConvergenceRow),
{
    cfg.validate()?;
    let c = &cfg.convergence;
    if c.nodes.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two grids".into()));
    }
    let scenario = cfg.scenario();
    let mut rows = Vec::new();
    for &mode in &c.modes {
        for &k in &c.degrees {
            for &n in &c.nodes {
                let e = elements_for_nodes(n, k)?;
                let mesh = scenario.mesh([e, e], k)?;
                let mut sc = cfg.solver_config();
                sc.mode = mode;
                sc.cfl = c.cfl;
                let fb = forward_backward_protocol(&scenario, c.half_time, &mesh, sc)?;
                let row = ConvergenceRow {
                    method: mode.to_string(),
                    degree: k,
                    nodes: n,
                    elements: e,
                    errors: fb.errors,
                    rates: None,
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    attach_rates(&mut rows);
    Ok(rows)
}

/// Runs [`convergence`] and writes `convergence.csv` into the output directory.
pub fn convergence_to_disk<F>(cfg: &RunConfig, progress: F) -> Result<(Vec<ConvergenceRow>, PathBuf)>
where
    F: FnMut(&ConvergenceRow),
{
    let rows = convergence(cfg, progress)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("convergence.csv");
    std::fs::write(&path, convergence_csv(&rows))?;
    Ok((rows, path))
}

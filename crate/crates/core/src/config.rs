//! Run configuration in a flat `key = value` format with `[section]` headers.
//!
//! ```text
//! [run]
//! preset = two_stream
//! degree = 3
//! elements = 32x64
//! [output]
//! dir = out/two_stream
//! snapshot_times = 0, 12, 18
//! ```
//!
//! Keys are addressed as `section.key`. Any key can be overridden through an
//! environment variable named `VPFEM_<SECTION>_<KEY>` in upper case, for
//! example `VPFEM_RUN_DEGREE=2`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrator::{MassTreatment, SolverConfig};
use crate::linsolve::SolveOptions;
use crate::scenarios::{Preset, Scenario};
use crate::stabilization::{Bootstrap, StabilizationMode};

pub const ENV_PREFIX: &str = "VPFEM_";

/// Every recognised `section.key`.
pub const KEYS: [&str; 22] = [
    "run.preset",
    "run.degree",
    "run.elements",
    "run.cfl",
    "run.final_time",
    "run.mode",
    "run.bootstrap",
    "run.mass",
    "physics.alpha",
    "physics.theta",
    "output.dir",
    "output.snapshot_times",
    "output.series_interval",
    "output.vtk",
    "solver.poisson_tol",
    "solver.smoother_tol",
    "solver.max_iter",
    "convergence.nodes",
    "convergence.degrees",
    "convergence.modes",
    "convergence.half_time",
    "convergence.cfl",
];

/// Section whose keys are informational and ignored when parsing.
pub const MANIFEST_SECTION: &str = "manifest";

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    /// Nodes per axis in the inclusive convention `k · elements + 1`.
    pub nodes: Vec<usize>,
    pub degrees: Vec<usize>,
    pub modes: Vec<StabilizationMode>,
    /// Duration of each half of the forward–backward run.
    pub half_time: f64,
    pub cfl: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            nodes: vec![31, 61, 121],
            degrees: vec![1, 2, 3],
            modes: vec![StabilizationMode::None, StabilizationMode::Rv],
            half_time: 5.0,
            cfl: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub degree: usize,
    pub elements: [usize; 2],
    pub cfl: f64,
    pub final_time: f64,
    pub mode: StabilizationMode,
    pub bootstrap: Bootstrap,
    pub mass: MassTreatment,
    pub alpha: f64,
    pub theta: f64,
    pub output_dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    /// Minimum time between series rows; zero records every step.
    pub series_interval: f64,
    pub vtk: bool,
    pub poisson_tol: f64,
    pub smoother_tol: f64,
    pub max_iter: usize,
    pub convergence: ConvergenceConfig,
}

impl RunConfig {
    /// Defaults for a preset.
    pub fn for_preset(preset: Preset) -> Self {
        let sc = Scenario::new(preset);
        let solver = SolverConfig::default();
        Self {
            preset,
            degree: sc.degree,
            elements: sc.elements,
            cfl: solver.cfl,
            final_time: sc.final_time,
            mode: solver.mode,
            bootstrap: solver.bootstrap,
            mass: solver.mass,
            alpha: sc.alpha,
            theta: sc.theta,
            output_dir: PathBuf::from("output").join(preset.name()),
            snapshot_times: sc.snapshot_times,
            series_interval: 0.0,
            vtk: true,
            poisson_tol: solver.poisson_solve.tol,
            smoother_tol: solver.smoother_solve.tol,
            max_iter: solver.poisson_solve.max_iter,
            convergence: ConvergenceConfig::default(),
        }
    }

    /// Builds a configuration from `(section.key, value)` pairs applied in
    /// order. The preset is resolved first so that its defaults can be
    /// overridden by the remaining entries.
    pub fn from_entries(entries: &[(String, String)]) -> Result<Self> {
        let preset = entries
            .iter()
            .rev()
            .find(|(k, _)| k == "run.preset")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(Preset::Landau);
        let mut cfg = Self::for_preset(preset);
        for (k, v) in entries {
            if k != "run.preset" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(&parse_entries(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key. Setting `run.preset` here only changes the preset name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "run.preset" => self.preset = v.parse()?,
            "run.degree" => self.degree = parse_num(key, v)?,
            "run.elements" => self.elements = parse_elements(v)?,
            "run.cfl" => self.cfl = parse_num(key, v)?,
            "run.final_time" => self.final_time = parse_num(key, v)?,
            "run.mode" => self.mode = v.parse()?,
            "run.bootstrap" => self.bootstrap = v.parse()?,
            "run.mass" => self.mass = v.parse()?,
            "physics.alpha" => self.alpha = parse_num(key, v)?,
            "physics.theta" => self.theta = parse_num(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "output.snapshot_times" => self.snapshot_times = parse_list(key, v)?,
            "output.series_interval" => self.series_interval = parse_num(key, v)?,
            "output.vtk" => self.vtk = parse_bool(key, v)?,
            "solver.poisson_tol" => self.poisson_tol = parse_num(key, v)?,
            "solver.smoother_tol" => self.smoother_tol = parse_num(key, v)?,
            "solver.max_iter" => self.max_iter = parse_num(key, v)?,
            "convergence.nodes" => self.convergence.nodes = parse_list(key, v)?,
            "convergence.degrees" => self.convergence.degrees = parse_list(key, v)?,
            "convergence.modes" => {
                self.convergence.modes = split_list(v).map(str::parse).collect::<Result<_>>()?
            }
            "convergence.half_time" => self.convergence.half_time = parse_num(key, v)?,
            "convergence.cfl" => self.convergence.cfl = parse_num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(1..=3).contains(&self.degree) {
            return fail(format!("degree {} outside 1..=3", self.degree));
        }
        if self.elements.iter().any(|&e| e == 0) {
            return fail("elements per axis must be positive".into());
        }
        if !(self.cfl > 0.0) || !self.cfl.is_finite() {
            return fail(format!("cfl must be positive, got {}", self.cfl));
        }
        if !(self.final_time >= 0.0) || !self.final_time.is_finite() {
            return fail(format!("final_time must be nonnegative, got {}", self.final_time));
        }
        if !(self.alpha.abs() < 1.0) {
            return fail(format!("|alpha| must be below 1, got {}", self.alpha));
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return fail("snapshot times must be nonnegative".into());
        }
        if !(self.series_interval >= 0.0) {
            return fail("series_interval must be nonnegative".into());
        }
        if !(self.poisson_tol > 0.0 && self.smoother_tol > 0.0) || self.max_iter == 0 {
            return fail("solver tolerances and iteration limit must be positive".into());
        }
        let c = &self.convergence;
        if c.degrees.iter().any(|d| !(1..=3).contains(d)) {
            return fail("convergence degrees must lie in 1..=3".into());
        }
        if c.nodes.iter().any(|&n| n < 3) {
            return fail("convergence grids need at least 3 nodes per axis".into());
        }
        if !(c.half_time >= 0.0) || !(c.cfl > 0.0) {
            return fail("convergence half_time must be nonnegative and cfl positive".into());
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        let mut sc = Scenario::new(self.preset);
        sc.alpha = self.alpha;
        sc.theta = self.theta;
        sc.degree = self.degree;
        sc.elements = self.elements;
        sc.final_time = self.final_time;
        sc.snapshot_times = self.snapshot_times.clone();
        sc
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            mode: self.mode,
            bootstrap: self.bootstrap,
            cfl: self.cfl,
            mass: self.mass,
            poisson_solve: SolveOptions {
                tol: self.poisson_tol,
                max_iter: self.max_iter,
            },
            smoother_solve: SolveOptions {
                tol: self.smoother_tol,
                max_iter: self.max_iter,
            },
            ..SolverConfig::default()
        }
    }

    /// `(section.key, value)` pairs that reproduce this configuration.
    pub fn entries(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let ulist = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let c = &self.convergence;
        let values = [
            self.preset.name().to_string(),
            self.degree.to_string(),
            format!("{}x{}", self.elements[0], self.elements[1]),
            self.cfl.to_string(),
            self.final_time.to_string(),
            self.mode.to_string(),
            self.bootstrap.to_string(),
            self.mass.to_string(),
            self.alpha.to_string(),
            self.theta.to_string(),
            self.output_dir.display().to_string(),
            list(&self.snapshot_times),
            self.series_interval.to_string(),
            self.vtk.to_string(),
            self.poisson_tol.to_string(),
            self.smoother_tol.to_string(),
            self.max_iter.to_string(),
            ulist(&c.nodes),
            ulist(&c.degrees),
            c.modes.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
            c.half_time.to_string(),
            c.cfl.to_string(),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    /// Serializes to the sectioned text format.
    pub fn to_config_string(&self) -> String {
        render_sections(&self.entries())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_preset(Preset::Landau)
    }
}

impl FromStr for RunConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Writes `(section.key, value)` pairs grouped under `[section]` headers in
/// first-appearance order.
pub fn render_sections(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    let mut current = "";
    for (k, v) in entries {
        let (section, key) = k.split_once('.').unwrap_or(("", k.as_str()));
        if section != current {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{section}]");
            current = section;
        }
        let _ = writeln!(out, "{key} = {v}");
    }
    out
}

/// Parses the sectioned text format into `(section.key, value)` pairs.
/// Comments start with `#` or `;`. Keys of the manifest section are dropped.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", no + 1)))?;
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        if section == MANIFEST_SECTION {
            continue;
        }
        let k = k.trim().to_ascii_lowercase();
        let key = if k.contains('.') || section.is_empty() {
            k
        } else {
            format!("{section}.{k}")
        };
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", no + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Environment variable name overriding `section.key`.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_ascii_uppercase())
}

/// Entries from variables carrying the environment prefix.
pub fn env_entries<I>(vars: I) -> Result<Vec<(String, String)>>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut out = Vec::new();
    for (name, value) in vars {
        if !name.starts_with(ENV_PREFIX) {
            continue;
        }
        let key = KEYS
            .iter()
            .find(|k| env_name(k) == name)
            .ok_or_else(|| Error::Config(format!("unknown environment override `{name}`")))?;
        out.push((key.to_string(), value));
    }
    out.sort();
    Ok(out)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split([',', ' ']).map(str::trim).filter(|s| !s.is_empty())
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    split_list(v).map(|s| parse_num(key, s)).collect()
}

/// `"32x64"`, `"32, 64"` or a single count used for both axes.
pub fn parse_elements(v: &str) -> Result<[usize; 2]> {
    let parts: Vec<usize> = v
        .split(['x', 'X', ',', ' ', '×'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num("run.elements", s))
        .collect::<Result<_>>()?;
    match parts[..] {
        [n] => Ok([n, n]),
        [a, b] => Ok([a, b]),
        _ => Err(Error::Config(format!("invalid element counts `{v}`"))),
    }
}

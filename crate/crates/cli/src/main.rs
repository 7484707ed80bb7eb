use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vlasov_fem::config::{env_entries, env_name, parse_entries, RunConfig, ENV_PREFIX, KEYS};
use vlasov_fem::driver;
use vlasov_fem::output::convergence_table;
use vlasov_fem::scenarios::{Preset, Scenario};
use vlasov_fem::Error;

/// Continuous finite element Vlasov–Poisson and guiding-center solver.
///
/// Settings are layered: preset defaults, then `--config`, then
/// `VPFEM_<SECTION>_<KEY>` environment variables, then flags.
#[derive(Parser, Debug)]
#[command(name = "vpfem", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time-dependent run writing series.csv, snapshots and manifest.ini.
    Run(RunArgs),
    /// Forward–backward convergence study writing convergence.csv.
    Convergence(ConvergenceArgs),
    /// List presets, or print one preset's default configuration.
    Presets {
        /// Preset whose configuration to print.
        name: Option<String>,
    },
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Configuration file in sectioned key = value format.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Benchmark preset.
    #[arg(long)]
    preset: Option<String>,
    /// Polynomial degree (1, 2 or 3).
    #[arg(short = 'k', long)]
    degree: Option<String>,
    /// Elements per axis, e.g. 32x64.
    #[arg(long)]
    elements: Option<String>,
    /// CFL number of the time step.
    #[arg(long)]
    cfl: Option<String>,
    /// none, low_order, rv or rv_isotropic.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory.
    #[arg(short, long)]
    output: Option<String>,
    /// Any key as section.key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// End time of the run.
    #[arg(long)]
    final_time: Option<String>,
    /// Comma-separated snapshot times.
    #[arg(long)]
    snapshot_times: Option<String>,
    /// Minimum time between series rows (0 records every step).
    #[arg(long)]
    series_interval: Option<String>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Nodes per axis of each grid, e.g. 31,61,121.
    #[arg(long)]
    nodes: Option<String>,
    /// Degrees to study, e.g. 1,2,3.
    #[arg(long)]
    degrees: Option<String>,
    /// Methods to study, e.g. none,rv.
    #[arg(long)]
    modes: Option<String>,
    /// Duration of each half of the forward–backward run.
    #[arg(long)]
    half_time: Option<String>,
}

fn common_entries(c: &CommonArgs) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    if let Some(path) = &c.config {
        out.extend(parse_entries(&std::fs::read_to_string(path)?)?);
    }
    out.extend(env_entries(std::env::vars())?);
    let flags = [
        ("run.preset", &c.preset),
        ("run.degree", &c.degree),
        ("run.elements", &c.elements),
        ("run.cfl", &c.cfl),
        ("run.mode", &c.mode),
        ("output.dir", &c.output),
    ];
    push_flags(&mut out, &flags);
    for s in &c.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`--set {s}` is not KEY=VALUE")))?;
        let k = k.trim().to_ascii_lowercase();
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

fn push_flags(out: &mut Vec<(String, String)>, flags: &[(&str, &Option<String>)]) {
    for (k, v) in flags {
        if let Some(v) = v {
            out.push((k.to_string(), v.clone()));
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::UnknownPreset(_)
        | Error::InvalidDegree(_)
        | Error::InvalidAxis(_)
        | Error::AsymmetricVelocityAxis { .. } => 2,
        Error::NonFinite { .. } => 4,
        _ => 3,
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(a) => {
            let mut entries = common_entries(&a.common)?;
            push_flags(
                &mut entries,
                &[
                    ("run.final_time", &a.final_time),
                    ("output.snapshot_times", &a.snapshot_times),
                    ("output.series_interval", &a.series_interval),
                ],
            );
            let cfg = RunConfig::from_entries(&entries)?;
            eprintln!(
                "running {} Q{} {}x{} {} to t={}",
                cfg.preset, cfg.degree, cfg.elements[0], cfg.elements[1], cfg.mode, cfg.final_time
            );
            let s = driver::run(&cfg)?;
            println!(
                "steps={} t={} rows={} max_mass_deviation={:e} wall={:.2}s",
                s.steps, s.final_time, s.rows, s.max_mass_deviation, s.wall_seconds
            );
            println!("series: {}", s.series.display());
            println!("manifest: {}", s.manifest.display());
            for f in &s.snapshots {
                println!("snapshot: {}", f.header.display());
            }
        }
        Command::Convergence(a) => {
            // The reflection protocol is defined for the two-stream preset
            // unless another one is requested.
            let mut entries = vec![("run.preset".to_string(), "two_stream".to_string())];
            entries.extend(common_entries(&a.common)?);
            push_flags(
                &mut entries,
                &[
                    ("convergence.nodes", &a.nodes),
                    ("convergence.degrees", &a.degrees),
                    ("convergence.modes", &a.modes),
                    ("convergence.half_time", &a.half_time),
                ],
            );
            let cfg = RunConfig::from_entries(&entries)?;
            let (rows, path) = driver::convergence_to_disk(&cfg, |r| {
                eprintln!("{} Q{} {} nodes: L2 {:.3e}", r.method, r.degree, r.nodes, r.errors.l2)
            })?;
            print!("{}", convergence_table(&rows));
            println!("table: {}", path.display());
        }
        Command::Presets { name: None } => {
            for p in Preset::ALL {
                let sc = Scenario::new(p);
                println!(
                    "{:<24} {:<58} default Q{} {}x{}, T={}",
                    p.name(),
                    p.description(),
                    sc.degree,
                    sc.elements[0],
                    sc.elements[1],
                    sc.final_time
                );
            }
            println!("\nenvironment overrides use the prefix {ENV_PREFIX}, e.g. {}", env_name("run.degree"));
        }
        Command::Presets { name: Some(n) } => {
            let p: Preset = n.parse()?;
            print!("{}", RunConfig::for_preset(p).to_config_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

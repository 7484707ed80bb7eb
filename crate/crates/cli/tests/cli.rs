use std::path::Path;
use std::process::{Command, Output};

use vlasov_fem::config::RunConfig;

fn vpfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpfem"))
        .args(args)
        .env_remove("VPFEM_RUN_DEGREE")
        .output()
        .expect("spawn vpfem")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_run(dir: &Path, extra: &[&str]) -> Output {
    timed_run(dir, "0.5", extra)
}

fn timed_run(dir: &Path, final_time: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--preset",
        "landau",
        "--elements",
        "8x8",
        "--final-time",
        final_time,
        "--snapshot-times",
        "0,0.25",
        "--output",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    vpfem(&args)
}

#[test]
fn presets_lists_every_preset() {
    let o = vpfem(&["presets"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["landau", "two_stream", "two_stream_multivortex", "bump_on_tail", "guiding_center"] {
        assert!(s.contains(name), "{name} missing from\n{s}");
    }
}

#[test]
fn preset_config_parses_back() {
    let o = vpfem(&["presets", "bump_on_tail"]);
    assert!(o.status.success());
    let cfg = RunConfig::parse(&stdout(&o)).unwrap();
    assert_eq!(cfg, RunConfig::for_preset("bump_on_tail".parse().unwrap()));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(small_run(dir.path(), &["--degree", "5"]).status.code(), Some(2));
    assert_eq!(small_run(dir.path(), &["--mode", "bogus"]).status.code(), Some(2));
    assert_eq!(small_run(dir.path(), &["--set", "run.nope=1"]).status.code(), Some(2));
    assert_eq!(vpfem(&["presets", "kelvin_helmholtz"]).status.code(), Some(2));
    assert_eq!(vpfem(&["run", "--config", "/nonexistent/cfg.ini"]).status.code(), Some(3));
}

#[test]
fn blow_up_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = timed_run(dir.path(), "400", &["--mode", "none", "--cfl", "40", "--set", "physics.alpha=0.5"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_run(a.path(), &[]).status.success());
    assert!(small_run(b.path(), &[]).status.success());
    let sa = std::fs::read(a.path().join("series.csv")).unwrap();
    let sb = std::fs::read(b.path().join("series.csv")).unwrap();
    assert_eq!(sa, sb);
    for stem in ["f_t00000.0000", "f_t00000.2500"] {
        for ext in ["json", "bin", "vtk"] {
            assert!(a.path().join(format!("{stem}.{ext}")).exists(), "{stem}.{ext}");
        }
    }
    let manifest = RunConfig::load(&a.path().join("manifest.ini")).unwrap();
    assert_eq!(manifest.elements, [8, 8]);
    assert_eq!(manifest.final_time, 0.5);
    assert_eq!(manifest.output_dir, a.path());
}

#[test]
fn zero_final_time_gives_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = timed_run(dir.path(), "0", &[]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("t,dt,mass,momentum,kinetic_energy,electric_energy,total_energy,l2norm,Ee_log,max_eps_x,max_eps_v\n"));
}

#[test]
fn environment_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_vpfem"))
        .args(["run", "--elements", "4x4", "--final-time", "0", "--output", dir.path().to_str().unwrap()])
        .env("VPFEM_RUN_DEGREE", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let cfg = RunConfig::load(&dir.path().join("manifest.ini")).unwrap();
    assert_eq!(cfg.degree, 2);
}

#[test]
fn convergence_writes_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = vpfem(&[
        "convergence",
        "--nodes",
        "9,17,33",
        "--degrees",
        "1",
        "--modes",
        "none",
        "--half-time",
        "0.25",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].contains(",-,"));
    let rates = lines[2..].iter().filter(|l| !l.contains(",-,")).count();
    assert_eq!(rates, 2);
}

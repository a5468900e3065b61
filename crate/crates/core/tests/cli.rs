use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use uvlm_fsi::sim::{load_config_file, SimConfig, TimeSeriesOutput, PLATE_TOML, TIMESERIES_HEADER};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uvlm-fsi")).args(args).output().expect("binary runs")
}

fn small(out: &Path) -> Vec<String> {
    ["--preset", "reduced", "--mesh", "4,4,1", "--t-final", "0.05", "--out", out.to_str().unwrap()]
        .map(String::from)
        .to_vec()
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let o = run(&["--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_values_exit_one() {
    assert_eq!(run(&["--solver", "broyden"]).status.code(), Some(1));
    assert_eq!(run(&["--forcing", "const:2"]).status.code(), Some(1));
    assert_eq!(run(&["--config", "/nonexistent/plate.toml"]).status.code(), Some(1));
    assert_eq!(run(&["--config", "a.toml", "--preset", "plate"]).status.code(), Some(1));
}

#[test]
fn smoke_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = small(dir.path());
    args.extend(["--solver", "quasi", "--tol", "1e-8", "--wake-dump"].map(String::from));
    let o = Command::new(env!("CARGO_BIN_EXE_uvlm-fsi")).args(&args).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert!(csv.starts_with(TIMESERIES_HEADER));
    let series = TimeSeriesOutput::from_csv(&csv).unwrap();
    assert_eq!(series.rows.len(), 9);
    assert!(series.rows.iter().all(|r| r.res_norm <= 1e-8 && r.cl.is_finite()));
    let timing = fs::read_to_string(dir.path().join("timing.txt")).unwrap();
    assert!(timing.contains("Total [s]") && timing.contains("Average per time step [s]"));
    let wake = fs::read_to_string(dir.path().join("wake_9.csv")).unwrap();
    assert!(wake.starts_with("row,node,x,y,z,gamma"));
    assert_eq!(wake.lines().count(), 1 + 5 * 10);
}

#[test]
fn compare_solvers_reports_match() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = small(dir.path());
    args.push("--compare-solvers".into());
    let o = Command::new(env!("CARGO_BIN_EXE_uvlm-fsi")).args(&args).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("compare.txt")).unwrap();
    let row = |name: &str| table.lines().find(|l| l.starts_with(name)).unwrap().to_string();
    assert!(row("inexact-2").trim_end().ends_with("match"), "{table}");
    assert!(row("exact").trim_end().ends_with("match"));
    for name in ["exact", "quasi", "inexact-1", "inexact-2"] {
        assert!(dir.path().join(name).join("timeseries.csv").exists());
    }
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.toml");
    let src = PLATE_TOML
        .replace("m_s = 50", "m_s = 4")
        .replace("m_a = 50", "m_a = 4")
        .replace("n_a = 4", "n_a = 1")
        .replace("t_final = 3.0", "t_final = 0.02")
        .replace("tol = 1e-8", "tol = 1e-8\nmax_steps = 1");
    fs::write(&path, src).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plate.toml");
    fs::write(&path, PLATE_TOML).unwrap();
    assert_eq!(load_config_file(&path).unwrap(), SimConfig::plate());
    fs::write(&path, PLATE_TOML.replace("[uvlm]", "[uvlm]\nbogus = 1")).unwrap();
    assert!(load_config_file(&path).is_err());
    assert_eq!(run(&["--config", path.to_str().unwrap()]).status.code(), Some(1));
}

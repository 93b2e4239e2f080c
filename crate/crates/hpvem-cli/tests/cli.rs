use std::fs;
use std::path::Path;
use std::process::Command;

use hpvem::adaptivity::{EstimatorKind, Mode};
use hpvem::problem::CaseId;
use hpvem_cli::output::CSV_COLUMNS;
use hpvem_cli::{run, MeshKind, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hpvem"))
}

/// CSV without the wall_ms column.
fn stable_csv(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("results.csv"))
        .unwrap()
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.pop();
            f.join(",")
        })
        .collect()
}

#[test]
fn run_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "run",
            "--case",
            "tc1",
            "--mesh",
            "cartesian",
            "--p",
            "2",
            "--mode",
            "adapt-h",
            "--estimator",
            "eq",
            "--stab",
            "drecipe",
            "--iters",
            "3",
            "--out",
        ])
        .arg(dir.path())
        .env("HPVEM_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), CSV_COLUMNS.len());
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["case"], "tc1");
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    assert_eq!(json["rows"][0]["elements"]["degree"].as_array().unwrap().len(), 12);
    let svg = fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("ndof^(1/2)") && svg.contains("eta_eq"));
}

#[test]
fn zero_iterations_give_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        iters: 0,
        out: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    assert!(run(&cfg).unwrap().is_empty());
    assert_eq!(stable_csv(dir.path()).len(), 1);
}

#[test]
fn runs_are_deterministic() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let cfg = RunConfig {
            case: CaseId::Tc3,
            mesh: MeshKind::Triangular,
            mode: Mode::AdaptH,
            estimator: EstimatorKind::Flux,
            iters: 3,
            out: d.path().to_path_buf(),
            ..RunConfig::default()
        };
        run(&cfg).unwrap();
    }
    assert_eq!(stable_csv(dirs[0].path()), stable_csv(dirs[1].path()));
}

#[test]
fn hp_plot_uses_cube_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        case: CaseId::Tc2,
        mesh: MeshKind::Cartesian,
        mode: Mode::AdaptHp,
        iters: 3,
        out: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    run(&cfg).unwrap();
    assert!(fs::read_to_string(dir.path().join("plot.svg")).unwrap().contains("ndof^(1/3)"));
}

#[test]
fn bad_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--case", "tc2", "--estimator", "flux", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Dirichlet"));
    let out = bin().args(["repro", "--table", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["run", "--case", "tc9"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn repro_passes_for_the_p1_table() {
    let out = bin().args(["repro", "--table", "tri-p1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("tri-p1"));
}

#[test]
fn repro_failure_exits_with_two() {
    let out = bin().args(["repro", "--table", "cart-p2"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let expected = if text.contains(": PASS") { 0 } else { 2 };
    assert_eq!(out.status.code(), Some(expected));
}

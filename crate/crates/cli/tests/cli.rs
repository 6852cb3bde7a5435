//! End-to-end tests of the `fracflow` binary: exit codes, artifacts and
//! replay.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fracflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn list_shows_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracflow(&["list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = text(&o);
    for e in fracflow_cli::registry::EXPERIMENTS {
        assert!(out.contains(e.name), "{}", e.name);
    }
}

#[test]
fn run_writes_artifacts_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "experiment = \"zero-nonlinearity\"\nmembers = 3\n[solver]\nsteps = 20\n",
    )
    .unwrap();
    let o = fracflow(&["run", "run.toml", "--workers", "1", "--seed", "9", "--out", "a"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let out = dir.path().join("a");
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("tables/zero_flux.csv").is_file());
    assert!(out.join("fields/member0.f64").is_file());
    assert!(out.join("fields/member0.json").is_file());

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 9);
    assert_eq!(manifest["config"]["members"], 3);
    assert_eq!(manifest["member_seeds"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["passed"], true);
    // defaults are echoed in full, not only the fields the file set
    assert!(manifest["config"]["solver"]["tol"].is_number());

    let o = fracflow(&["replay", "a/manifest.json", "--workers", "3", "--out", "b"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert_eq!(
        fs::read(dir.path().join("a/tables/zero_flux.csv")).unwrap(),
        fs::read(dir.path().join("b/tables/zero_flux.csv")).unwrap()
    );

    // no staging directories are left behind
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains("staging"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("typo.toml"), "experiment = \"zero-nonlinearty\"\n").unwrap();
    let o = fracflow(&["run", "typo.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("did you mean \"zero-nonlinearity\""), "{}", text(&o));

    fs::write(dir.path().join("bad.toml"), "experiment = \"zero-nonlinearity\"\nmembers = 0\n").unwrap();
    assert_eq!(fracflow(&["run", "bad.toml"], dir.path()).status.code(), Some(2));

    fs::write(dir.path().join("s.toml"), "experiment = \"zero-nonlinearity\"\n[solver]\ns = 1.5\n").unwrap();
    assert_eq!(fracflow(&["run", "s.toml"], dir.path()).status.code(), Some(2));

    assert_eq!(fracflow(&["run", "missing.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(fracflow(&["run", "zero-nonlinearity", "--workers", "0"], dir.path()).status.code(), Some(2));

    fs::create_dir(dir.path().join("taken")).unwrap();
    let o = fracflow(&["run", "kernel-identities", "--out", "taken"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn failing_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // no realistic z-score survives a zero allowance
    fs::write(
        dir.path().join("strict.toml"),
        "experiment = \"linear-spectral-decay\"\nmembers = 50\n[sweep]\nsigmas = 0.0\n",
    )
    .unwrap();
    let o = fracflow(&["run", "strict.toml", "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("FAIL max_abs_z"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], false);
}

//! End-to-end tests of the command-line binary: exit codes, output files,
//! override semantics, and the machine-readable error line.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pointnls"))
}

fn unique_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pointnls_cli_{tag}"));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const TINY: &str = r#"
epsilon = 0.5
T = 0.01
dt = 1e-3

[grid]
L = 8.0
M = 256

[[defects]]
y = 0.0
mu = 0.5
potential = { kind = "gaussian", amplitude = 0.5641895835477563, width = 1.0 }

[psi0]
kind = "gaussian"

[experiment]
epsilons = [0.5, 0.4]
output_count = 4
"#;

fn write_tiny(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    path
}

#[test]
fn self_test_passes() {
    let out = bin().arg("self-test").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "self-test output:\n{stdout}");
    assert!(stdout.contains("all checks passed"), "self-test output:\n{stdout}");
}

#[test]
fn converge_runs_end_to_end_and_resolves_the_grid() {
    let dir = unique_dir("converge");
    let cfg = write_tiny(&dir);
    let results = dir.join("results");
    let out = bin()
        .arg("converge")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&results)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "ladder.csv",
        "fits.csv",
        "report.txt",
        "point_charges.csv",
        "point_rows.csv",
        "scaled_eps_0.5.csv",
        "scaled_eps_0.4.csv",
        "config_resolved.toml",
    ] {
        assert!(results.join(name).exists(), "missing {name}");
    }
    // The 256-node floor cannot resolve eps = 0.4; the echoed config must
    // carry the doubled node count that actually ran.
    let echoed = std::fs::read_to_string(results.join("config_resolved.toml")).unwrap();
    assert!(echoed.contains("M = 512"), "echoed config:\n{echoed}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_subcommands_exit_with_usage() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn inadmissible_couplings_are_config_errors_unless_overridden() {
    let dir = unique_dir("admissibility");
    let cfg = dir.join("focusing.toml");
    std::fs::write(
        &cfg,
        TINY.replace("mu = 0.5", "mu = 1.5").replace(
            "amplitude = 0.5641895835477563",
            "amplitude = -0.5641895835477563",
        ),
    )
    .unwrap();
    let out = bin()
        .arg("run-scaled")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("refused"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("kind=admissibility") && err.contains("mu < 1"),
        "stderr: {err}"
    );
    let out = bin()
        .arg("run-scaled")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("allowed"))
        .arg("--override-admissibility")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "override run stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn overrides_win_and_are_echoed() {
    let dir = unique_dir("overrides");
    let cfg = write_tiny(&dir);
    let results = dir.join("results");
    let out = bin()
        .arg("run-point")
        .arg("--config")
        .arg(&cfg)
        .args(["--dt", "2e-3", "--T", "0.02"])
        .arg("--out")
        .arg(&results)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let echoed = std::fs::read_to_string(results.join("config_resolved.toml")).unwrap();
    assert!(
        echoed.contains("dt = 0.002") && echoed.contains("T = 0.02"),
        "echoed config:\n{echoed}"
    );
    std::fs::remove_dir_all(&dir).ok();
}

//! End-to-end checks of the binary: exit codes, emitted files, and byte
//! determinism of the CSV outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

static DIR_SEQ: AtomicU32 = AtomicU32::new(0);

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "sir-icu-cli-{}-{tag}-{}",
        std::process::id(),
        DIR_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, body).unwrap();
    path
}

const BASE: &str = "\
beta = 0.18
gamma = 0.07
v_max = 0.01
i_max = 0.005
lambda_v = 1.0
lambda_i = 0.0
s0 = 0.7
i0 = 0.001
T = 400
dt = 0.2
";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sir-icu"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn optimize_emits_trajectory_and_summary() {
    let dir = scratch_dir("optimize");
    let cfg = write_config(&dir, BASE);
    let out = run(&[
        "optimize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,s,i,v\n"));
    assert_eq!(csv.lines().count(), 2002, "header plus one row per node");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("optimize.json")).unwrap()).unwrap();
    assert!(json["feasible"].as_bool().unwrap());
    let t_star = json["t_star"].as_f64().unwrap();
    assert!((t_star - 49.67).abs() < 0.1, "t_star = {t_star}");
    assert!(dir.join("config.resolved").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn runs_are_byte_identical() {
    let dir_a = scratch_dir("det-a");
    let dir_b = scratch_dir("det-b");
    let cfg = write_config(&dir_a, BASE);
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "optimize",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--set",
            "lambda_i=0.17",
        ]);
        assert!(out.status.success());
    }
    let a = fs::read(dir_a.join("trajectory.csv")).unwrap();
    let b = fs::read(dir_b.join("trajectory.csv")).unwrap();
    assert_eq!(a, b);
    let a = fs::read(dir_a.join("optimize.json")).unwrap();
    let b = fs::read(dir_b.join("optimize.json")).unwrap();
    assert_eq!(a, b);
    fs::remove_dir_all(&dir_a).unwrap();
    fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn viability_emits_curves() {
    let dir = scratch_dir("viability");
    let cfg = write_config(&dir, BASE);
    let out = run(&[
        "viability",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("curves.csv")).unwrap();
    assert!(csv.starts_with("s,gamma,gamma_star\n"));
    assert_eq!(csv.lines().count(), 4097);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn simulate_emits_both_constant_runs() {
    let dir = scratch_dir("simulate");
    let cfg = write_config(&dir, BASE);
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(dir.join("trajectory_v0.csv").exists());
    assert!(dir.join("trajectory_vmax.csv").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invalid_config_exits_one_with_json_error() {
    let dir = scratch_dir("invalid");
    let cfg = write_config(&dir, &BASE.replace("i_max = 0.005", "i_max = 1.5"));
    let out = run(&[
        "optimize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("machine-readable error");
    assert_eq!(err["kind"], "validation");
    assert!(err["error"].as_str().unwrap().contains("i_max"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_key_exits_one() {
    let dir = scratch_dir("unknown-key");
    let cfg = write_config(&dir, &format!("{BASE}mystery = 1\n"));
    let out = run(&[
        "optimize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn nonviable_start_exits_two() {
    let dir = scratch_dir("nonviable");
    let cfg = write_config(&dir, &BASE.replace("i0 = 0.001", "i0 = 0.004"));
    let out = run(&[
        "optimize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "numerical");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_emits_report_with_exact_fields() {
    let dir = scratch_dir("verify");
    let cfg = write_config(&dir, BASE);
    let out = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("verify.json")).unwrap()).unwrap();
    for field in [
        "phi_sign_ok",
        "phi_zero_at_switch",
        "hamiltonian_dev",
        "complementarity_ok",
        "transversality_ok",
        "eta_positive_ok",
    ] {
        assert!(!report[field].is_null(), "missing field {field}");
    }
    assert_eq!(report["phi_sign_ok"], true);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn scenario_emits_family_outputs() {
    let dir = scratch_dir("scenario");
    let cfg = write_config(&dir, BASE);
    let out = run(&[
        "scenario",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["a", "b", "c"] {
        assert!(dir.join(format!("trajectory_{name}.csv")).exists());
    }
    assert!(dir.join("curves.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("scenario.json")).unwrap()).unwrap();
    let entries = summary.as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for entry in entries {
        assert_eq!(entry["report"]["phi_sign_ok"], true, "{entry}");
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_horizon_emits_rows_and_diffs() {
    let dir = scratch_dir("horizon");
    // shrink the horizon so the four doubled studies stay quick
    let cfg = write_config(&dir, &BASE.replace("T = 400", "T = 200"));
    let out = run(&[
        "sweep-horizon",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("sweep_horizon.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("horizon.json")).unwrap()).unwrap();
    assert_eq!(json["diffs"].as_array().unwrap().len(), 3);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_lambda_emits_rows_in_order() {
    let dir = scratch_dir("sweep");
    let cfg = write_config(&dir, BASE);
    let out = run(&[
        "sweep-lambda",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("sweep_lambda.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "key,t_star,cost,s_at_switch,region_at_switch,herd_time"
    );
    assert_eq!(lines.len(), 5);
    let keys: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(keys, vec![0.0, 0.05, 0.1, 0.17]);
    fs::remove_dir_all(&dir).unwrap();
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conformity"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

const REGULAR: &str = r#"{
  "schema_version": 1,
  "seed": 3,
  "network": { "k_regular": { "n": 12, "k": 3 } },
  "parameters": { "beta_preset": {} }
}"#;

#[test]
fn simulate_writes_trajectory_and_provenance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", REGULAR);
    let out = tmp.path().join("out");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trajectory.csv",
        "private.csv",
        "expressed.csv",
        "plot.gp",
        "metadata.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let meta = read_json(out.join("metadata.json"));
    assert_eq!(meta["provenance"]["seed"], 11);
    assert_eq!(meta["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["outcome"]["status"], "converged");
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,agent,y,y_hat\n"));
}

#[test]
fn json_format_replaces_trajectory_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", REGULAR);
    let out = tmp.path().join("out");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    assert!(!out.join("trajectory.csv").exists());
    let traj = read_json(out.join("trajectory.json"));
    assert_eq!(traj[0]["t"], 0);
    assert_eq!(traj[0]["y"].as_array().unwrap().len(), 12);
}

#[test]
fn missing_input_fails_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.json",
        r#"{"schema_version": 1, "network": {"file": "absent.json"}, "parameters": {"beta_preset": {}}}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!out.exists());
}

#[test]
fn config_must_name_exactly_one_network_source() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.json",
        r#"{"schema_version": 1,
            "network": {"k_regular": {"n": 6}, "file": "net.json"},
            "parameters": {"beta_preset": {}}}"#,
    );
    let o = run(&[
        "steady",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

#[test]
fn unknown_fields_and_versions_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let typo = write(tmp.path(), "a.json", &REGULAR.replace("\"seed\"", "\"sed\""));
    let version = write(
        tmp.path(),
        "b.json",
        &REGULAR.replace("\"schema_version\": 1", "\"schema_version\": 9"),
    );
    for cfg in [typo, version] {
        let o = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().join("o").to_str().unwrap(),
        ]);
        assert!(!o.status.success());
    }
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn threshold_model_requires_thresholds() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.json",
        &REGULAR.replace("\"seed\": 3", "\"seed\": 3, \"model\": \"threshold\""),
    );
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("thresholds"));
}

#[test]
fn steady_reports_operators_and_global_bound() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", REGULAR);
    let out = tmp.path().join("out");
    let o = run(&[
        "steady",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "global",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ops = read_json(out.join("operators.json"));
    assert!(ops["operators"]["rho_P"].as_f64().unwrap() < 1.0);
    let rep = &read_json(out.join("report.json"))["report"];
    assert!(rep["kappa"].as_f64().is_some());
    assert!(rep["private_gap_lower_bound"].as_f64().unwrap() <= rep["v_y_star"].as_f64().unwrap());
    assert_eq!(rep["inequalities"]["upper_chain"], true);
    assert!(out.join("R.csv").exists() && out.join("discrepancy.csv").exists());

    let local = tmp.path().join("local");
    assert!(run(&[
        "steady",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        local.to_str().unwrap()
    ])
    .status
    .success());
    assert!(read_json(local.join("report.json"))["report"]["kappa"].is_null());
}

#[test]
fn steady_with_full_susceptibility_reports_consensus() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.json",
        &REGULAR.replace("\"beta_preset\": {}", "\"beta_preset\": {\"lambda\": 1.0}"),
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "steady",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("operators.json").exists());
    let alpha = read_json(out.join("consensus.json"))["consensus_value"]
        .as_f64()
        .unwrap();
    assert!(alpha > 0.0 && alpha < 1.0);
}

#[test]
fn network_and_agent_files_are_read_relative_to_config() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "net.json",
        r#"{"n": 3, "w": [[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]], "m_mode": "mirror"}"#,
    );
    write(
        tmp.path(),
        "agents.json",
        r#"{"y0": [0.1, 0.5, 0.9], "lambda": [0.5, 0.6, 0.7], "phi": [0.3, 0.5, 0.8]}"#,
    );
    let cfg = write(
        tmp.path(),
        "run.json",
        r#"{"schema_version": 1, "network": {"file": "net.json"}, "parameters": {"file": "agents.json"}}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "steady",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let limits = fs::read_to_string(out.join("limits.csv")).unwrap();
    assert_eq!(limits.lines().count(), 4);
}

#[test]
fn asch_corners_and_curves() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (0.1, 0.9, "independent"),
        (0.9, 0.1, "yield_judgment"),
        (0.1, 0.1, "yield_action"),
    ];
    for (k, (l, p, expected)) in cases.iter().enumerate() {
        let spec = write(
            tmp.path(),
            &format!("s{k}.json"),
            &format!(r#"{{"lambda1": {l}, "phi1": {p}}}"#),
        );
        let out = tmp.path().join(format!("o{k}"));
        let o = run(&[
            "asch",
            "--config",
            spec.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let table = fs::read_to_string(out.join("classification.csv")).unwrap();
        assert!(table.lines().nth(1).unwrap().ends_with(expected), "{table}");
    }
    let curves = fs::read_to_string(tmp.path().join("o0/curves.csv")).unwrap();
    let first: Vec<f64> = curves
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    let last: Vec<f64> = curves
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!((first[0], first[1]), (0.0, 1.0));
    assert_eq!((last[0], last[1]), (1.0, 0.0));
}

#[test]
fn asch_grid_compares_closed_forms() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    let o = run(&["asch", "--grid", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 17);
    for line in cmp.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[3] - v[4]).abs() < 1e-8 && (v[5] - v[6]).abs() < 1e-8, "{line}");
    }
}

#[test]
fn sweep_is_deterministic_for_a_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.json",
        r#"{"schema_version": 1, "mode": "global", "seed": 5, "instances": 40, "n_min": 2, "n_max": 12}"#,
    );
    let summary = |name: &str| {
        let out = tmp.path().join(name);
        let o = run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("summary.json")).unwrap()
    };
    let a = summary("a");
    assert_eq!(a, summary("b"));
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["p"], 40);
    assert_eq!(v["q"], 0);
    assert_eq!(v["bound_violations"], 0);
    assert_eq!(v["inequality_pass_rate"], 1.0);
}

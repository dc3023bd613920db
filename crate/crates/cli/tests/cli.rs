use std::process::{Command, Output};

fn psi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psi")).args(args).env_remove("PSI_CONFIG").output().expect("psi runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn examples_run_reports_the_pfd_mean() {
    let o = psi(&["examples", "run", "fig4b"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.trim_start().starts_with("p ")).unwrap().to_string();
    let mean: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((mean - 11.0 / 1002.0).abs() < 1e-4, "{line}");
}

#[test]
fn examples_run_all_passes_every_entry() {
    let o = psi(&["examples", "run-all"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert_eq!(out.lines().count(), 21);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn examples_list_names_every_bundle() {
    let o = psi(&["examples", "list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 21);
    assert!(stdout(&o).contains("fig22b_aircraft"));
}

#[test]
fn missing_model_is_a_usage_error() {
    let o = psi(&["infer", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(psi(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(psi(&["oracle", "fig4b"]).status.code(), Some(2));
    assert_eq!(psi(&["examples", "run", "fig99"]).status.code(), Some(2));
    assert_eq!(psi(&["--help"]).status.code(), Some(0));
}

#[test]
fn infer_writes_csv_and_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("ev.json");
    std::fs::write(&evidence, r#"{"control": 0}"#).unwrap();
    let csv = dir.path().join("out.csv");
    let o = psi(&["infer", "fig17b", "--evidence", evidence.to_str().unwrap(), "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let row = text.lines().find(|l| l.starts_with("residual,")).unwrap();
    assert!(row.starts_with("residual,0.08,"), "{row}");

    let o = psi(&["infer", "fig17b"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((doc["nodes"]["residual"]["mean"].as_f64().unwrap() - 0.04).abs() < 1e-9);
}

#[test]
fn config_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"quadrature_points": 0}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_psi")).args(["infer", "fig4b"]).env("PSI_CONFIG", &cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("configuration"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"max_iterations": 40}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_psi")).args(["infer", "fig4b"]).env("PSI_CONFIG", &cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["config"]["max_iterations"], 40);
}

#[test]
fn validate_flags_broken_models() {
    let o = psi(&["validate", "fig13"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"version": 1, "nodes": [{"id": "a", "kind": "Boolean", "cpd": {"table": [[0.2, 0.2]]}}]}"#,
    )
    .unwrap();
    let o = psi(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("error"));
}

#[test]
fn compare_passes_on_a_bundled_model() {
    let o = psi(&["compare", "fig4b", "--samples", "200000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["worst"].as_array().unwrap().is_empty());
}

#[test]
fn compare_fails_when_the_policy_is_impossible() {
    let o = psi(&["compare", "fig13", "--samples", "20000", "--seed", "3", "--standard-errors", "0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn oracle_is_reproducible() {
    let a = psi(&["oracle", "fig17b", "--samples", "10000", "--seed", "9"]);
    let b = psi(&["oracle", "fig17b", "--samples", "10000", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_tabulates_each_value() {
    let o = psi(&["sweep", "fig17b", "--node", "control", "--values", "0,0.5,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o).lines().filter(|l| l.contains(",residual,")).map(str::to_string).collect();
    assert_eq!(rows.len(), 3);
    let means: Vec<f64> = rows.iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!((means[0] - 0.08).abs() < 1e-9 && (means[1] - 0.04).abs() < 1e-9 && means[2].abs() < 1e-9, "{means:?}");
    assert_eq!(psi(&["sweep", "fig17b", "--node", "nope", "--values", "1"]).status.code(), Some(2));
}

//! End-to-end checks of the binary: exit codes, report shape, determinism.

use std::path::Path;
use std::process::{Command, Output};

fn fhj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fhj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let start = text.find('{').expect("json in stdout");
    serde_json::from_str(&text[start..]).expect("valid json report")
}

#[test]
fn verify_fraccalc_suite_exits_zero() {
    let out = fhj(&["verify", "--suite", "fraccalc"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = json_of(&out);
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
}

#[test]
fn lyapunov_check_echoes_two_levels_at_alpha_point_three() {
    let out = fhj(&["lyapunov-check", "--alpha", "0.3", "--grid-n", "300"]);
    assert!(out.status.success());
    let report = json_of(&out);
    assert_eq!(report["params"]["derived"]["m"], serde_json::json!(2));
    assert_eq!(report["params"]["derived"]["betas"][1], serde_json::json!(0.3));
}

#[test]
fn malformed_config_exits_two_and_writes_nothing() {
    let dir = std::env::temp_dir().join("fhj-malformed-test");
    let _ = std::fs::remove_dir_all(&dir);
    let cfg = std::env::temp_dir().join("fhj-bad-config.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    let out = fhj(&[
        "metric",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new(&dir).exists(), "no output files on config errors");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let cfg = std::env::temp_dir().join("fhj-unknown-key.json");
    std::fs::write(&cfg, r#"{ "pairs": 5, "n": 50, "typo_key": 1 }"#).unwrap();
    let out = fhj(&["metric", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_reproducible_modulo_timing() {
    let strip = |out: &Output| {
        let mut v = json_of(out);
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string(&v).unwrap()
    };
    let a = fhj(&["metric", "--seed", "7", "--grid-n", "120"]);
    let b = fhj(&["metric", "--seed", "7", "--grid-n", "120"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(strip(&a), strip(&b), "same config and seed must agree");
    let c = fhj(&["metric", "--seed", "8", "--grid-n", "120"]);
    assert_ne!(strip(&a), strip(&c), "different seeds explore different pairs");
}

#[test]
fn list_fixtures_contains_the_drift_problem() {
    let out = fhj(&["list-fixtures"]);
    assert!(out.status.success());
    let report = json_of(&out);
    let fixtures = report["results"]["fixtures"].as_array().unwrap();
    assert!(!fixtures.is_empty());
    assert!(fixtures.iter().any(|f| f["id"] == "drift"));
    // registration spot checks hold for every fixture
    for f in fixtures {
        let worst = f["spot_check_worst_excess"].as_array().unwrap();
        assert!(worst[0].as_f64().unwrap() <= 1e-9);
        assert!(worst[1].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn refuted_stability_check_exits_one() {
    let cfg = std::env::temp_dir().join("fhj-refute-config.json");
    std::fs::write(
        &cfg,
        r#"{
            "fixture": "drift",
            "candidate": "state-readout",
            "n": 120,
            "start_index": 0,
            "t1_index": 36,
            "s": [2.0],
            "eps": 1e-3,
            "side": "upper"
        }"#,
    )
    .unwrap();
    let out = fhj(&["stability", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report = json_of(&out);
    assert_eq!(report["results"]["upper"]["status"], serde_json::json!("RefutedWithinClass"));
    assert!(report["results"]["upper"]["refutation_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn characteristics_writes_the_trajectory_csv() {
    let dir = std::env::temp_dir().join("fhj-characteristics-test");
    let _ = std::fs::remove_dir_all(&dir);
    let out = fhj(&[
        "characteristics",
        "--grid-n",
        "100",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("characteristic.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,z,psi1");
    assert_eq!(lines.count(), 101);
    assert!(dir.join("characteristics.json").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn value_reports_a_consistent_bracket() {
    let out = fhj(&["value", "--grid-n", "120", "--seed", "3"]);
    assert!(out.status.success());
    let report = json_of(&out);
    let lower = report["results"]["lower"].as_f64().unwrap();
    let upper = report["results"]["upper"].as_f64().unwrap();
    assert!(lower <= upper);
}

#[test]
fn witness_sweeps_stay_monotone() {
    let out = fhj(&["witness", "--grid-n", "120", "--seed", "11"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = json_of(&out);
    assert!(report["results"]["worst_step_increase"].as_f64().unwrap() <= 1e-4);
}

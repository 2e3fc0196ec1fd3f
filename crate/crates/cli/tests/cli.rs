use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fh_tabnet::data::{generate_separable_fixture, write_csv, RawTable, Schema};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fh-tabnet"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A small, quick configuration.
fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{
            "seed": 4,
            "synthetic": {"n_samples": 240, "n_features": 12, "n_informative": 5},
            "plan": {"epochs": 3},
            "cv": {"k": 3, "baselines": ["single_stage_tabnet", "ridge", "knn"]}
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn synth_default_cohort_hits_quotas_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let summary: Value = serde_json::from_str(&ok(d, &["synth", "--seed", "7", "--out", "a.csv", "--format", "json"])).unwrap();
    assert_eq!(summary["rows"], 1591);
    let counts = &summary["class_counts"];
    assert_eq!(
        [&counts["Definite"], &counts["Probable"], &counts["Possible"], &counts["Unlikely"]],
        [46, 102, 640, 803]
    );
    ok(d, &["synth", "--seed", "7", "--out", "b.csv"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(fs::read(d.join("a.schema.json")).unwrap(), fs::read(d.join("b.schema.json")).unwrap());
    assert_eq!(json(&d.join("a.schema.json"))["provenance"]["seed"], 7);
}

#[test]
fn invalid_priors_exit_with_usage_code_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"synthetic": {"class_priors": {"definite": 0.5, "probable": 0.5, "possible": 0.5, "unlikely": 0.5}}}"#,
    )
    .unwrap();
    let out = run(dir.path(), &["synth", "--config", cfg.to_str().unwrap(), "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("class_priors"));
}

#[test]
fn unknown_config_keys_and_bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"plan": {"epocs": 3}}"#).unwrap();
    let out = run(dir.path(), &["synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epocs"));
    assert_eq!(run(dir.path(), &["synth", "--jobs", "0"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["train"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_data_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["train", "--data", "nope.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn train_predict_explain_share_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let cfg = cfg.to_str().unwrap();
    ok(d, &["synth", "--config", cfg, "--out", "cohort.csv"]);
    ok(d, &["train", "--config", cfg, "--data", "cohort.csv", "--out", "model.json"]);
    ok(d, &["predict", "--config", cfg, "--model", "model.json", "--data", "cohort.csv", "--out", "pred.csv"]);
    ok(d, &["explain", "--config", cfg, "--model", "model.json", "--data", "cohort.csv", "--out", "explain.json"]);

    let pred = fs::read_to_string(d.join("pred.csv")).unwrap();
    let mut lines = pred.lines();
    assert_eq!(lines.next().unwrap(), "row_id,stage1_route,stage1_p_patient,final_label,final_p");
    assert_eq!(lines.count(), 240);

    let explain = json(&d.join("explain.json"));
    for stage in explain["stages"].as_array().unwrap() {
        let total: f64 = stage["ranking"].as_array().unwrap().iter().map(|f| f["weight"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    let strip = |mut v: Value| {
        v["command"] = Value::Null;
        v["config"]["plan"]["stage1"]["n_features"] = Value::Null;
        v["config"]["plan"]["stage2p"]["n_features"] = Value::Null;
        v["config"]["plan"]["stage2h"]["n_features"] = Value::Null;
        v
    };
    let model = json(&d.join("model.json"))["provenance"].clone();
    let meta = json(&d.join("pred.meta.json"))["provenance"].clone();
    let synth = json(&d.join("cohort.schema.json"))["provenance"].clone();
    assert_eq!(model["seed"], 4);
    assert_eq!(model["config"]["plan"]["epochs"], 3);
    assert_eq!(strip(model.clone()), strip(meta));
    assert_eq!(strip(model), strip(synth));
    assert_eq!(explain["provenance"]["seed"], 4);
}

#[test]
fn cli_model_fits_the_separable_fixture_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (x, labels) = generate_separable_fixture(16, 8, 4, 2).unwrap();
    let table = RawTable::from_matrix(&x).unwrap().with_labels(labels.clone()).unwrap();
    write_csv(&table, &Schema::for_table(&table), &d.join("fixture.csv")).unwrap();
    ok(d, &["train", "--seed", "2", "--data", "fixture.csv", "--out", "model.json"]);
    ok(d, &["predict", "--model", "model.json", "--data", "fixture.csv", "--out", "pred.csv"]);
    let pred = fs::read_to_string(d.join("pred.csv")).unwrap();
    let predicted: Vec<&str> = pred.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    let expected: Vec<&str> = labels.iter().map(|l| l.name()).collect();
    assert_eq!(predicted, expected);

    // Without the sidecar the schema comes from the checkpoint.
    fs::remove_file(d.join("fixture.schema.json")).unwrap();
    let stdout = ok(d, &["predict", "--model", "model.json", "--data", "fixture.csv"]);
    assert_eq!(stdout, pred);
}

#[test]
fn predict_rejects_rows_with_foreign_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (x, labels) = generate_separable_fixture(4, 3, 2, 1).unwrap();
    let table = RawTable::from_matrix(&x).unwrap().with_labels(labels).unwrap();
    write_csv(&table, &Schema::for_table(&table), &d.join("fixture.csv")).unwrap();
    ok(d, &["train", "--data", "fixture.csv", "--out", "model.json", "--config", small_config(d).to_str().unwrap()]);

    let mut renamed = table.clone();
    renamed.columns[1].name = "hdl".into();
    write_csv(&renamed, &Schema::for_table(&renamed), &d.join("other.csv")).unwrap();
    let out = run(d, &["predict", "--model", "model.json", "--data", "other.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x1"), "{err}");
}

#[test]
fn cv_is_reproducible_and_report_renders_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let cfg = cfg.to_str().unwrap();
    let text = ok(d, &["cv", "--config", cfg, "--out", "m1.json"]);
    ok(d, &["cv", "--config", cfg, "--out", "m2.json", "--jobs", "2", "--format", "json"]);
    let strip = |mut v: Value| {
        v["timestamps"] = Value::Null;
        v["provenance"]["config"]["jobs"] = Value::Null;
        v
    };
    let (a, b) = (json(&d.join("m1.json")), json(&d.join("m2.json")));
    assert_eq!(a["model_order"], serde_json::json!(["cascade_tabnet", "single_stage_tabnet", "ridge", "knn"]));
    assert_eq!(strip(a), strip(b));

    let header = text.lines().find(|l| l.contains("Unlikely")).expect("table header");
    let cols: Vec<&str> = ["Unlikely", "Possible", "Probable", "Definite"].to_vec();
    let pos: Vec<usize> = cols.iter().map(|c| header.find(c).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    for model in ["cascade_tabnet", "single_stage_tabnet", "ridge", "knn"] {
        assert!(text.lines().any(|l| l.starts_with(model)), "{model} row missing");
    }

    let report = ok(d, &["report", "--metrics", "m1.json"]);
    assert_eq!(report, text);
    let garbage = d.join("garbage.json");
    fs::write(&garbage, "{}").unwrap();
    assert_eq!(run(d, &["report", "--metrics", "garbage.json"]).status.code(), Some(2));
}

#[test]
fn preprocess_writes_report_and_clean_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("missing.json");
    let mut rates = vec![0.0; 8];
    rates[2] = 0.3;
    rates[4] = 0.01;
    fs::write(
        &cfg,
        serde_json::json!({
            "synthetic": {"n_samples": 200, "n_features": 8, "n_informative": 3, "missing_rates": rates}
        })
        .to_string(),
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    ok(d, &["synth", "--config", cfg, "--out", "raw.csv"]);
    let report: Value =
        serde_json::from_str(&ok(d, &["preprocess", "--config", cfg, "--data", "raw.csv", "--out", "clean.csv", "--format", "json"]))
            .unwrap();
    assert_eq!(report["dropped_columns"].as_array().unwrap().len(), 1);
    assert_eq!(report["rows_dropped"], 2);
    assert_eq!(report["final_rows"], 198);
    let saved = json(&d.join("clean.report.json"));
    assert_eq!(saved["final_rows"], 198);
    assert!(saved["provenance"].is_object());
    let clean = fs::read_to_string(d.join("clean.csv")).unwrap();
    assert_eq!(clean.lines().count(), 199);
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn uniscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uniscore"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("UNISCORE_JUDGE_URL")
        .output()
        .expect("spawn uniscore")
}

fn ok(args: &[&str]) -> String {
    let out = uniscore(args);
    assert!(
        out.status.success(),
        "uniscore {args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    uniscore(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn strip_timestamp(raw: &str) -> String {
    raw.lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn fit_is_deterministic_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let cfg = data("fit_reviews.json");
    ok(&["fit", "--config", p(&cfg), "--out", p(&a)]);
    std::thread::sleep(std::time::Duration::from_millis(5));
    ok(&["fit", "--config", p(&cfg), "--out", p(&b)]);
    let (ra, rb) = (
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap(),
    );
    assert_eq!(strip_timestamp(&ra), strip_timestamp(&rb));
    assert_eq!(ra.lines().filter(|l| l.contains("\"timestamp\"")).count(), 1);
}

#[test]
fn fit_prints_model_and_table() {
    let out = uniscore(&["fit", "--config", p(&data("fit_reviews.json")), "--seed", "11"]);
    assert!(out.status.success());
    let model: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(model["fit_metadata"]["seed"], 11);
    assert_eq!(model["criteria"].as_array().unwrap().len(), 5);
    let table = String::from_utf8(out.stderr).unwrap();
    assert!(table.contains("criterion") && table.contains("lambda_max"));
}

#[test]
fn discrete_fit_infer_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let scored = dir.path().join("s.jsonl");
    let log = dir.path().join("log.jsonl");
    let svg = dir.path().join("e.svg");
    let posts = data("posts.jsonl");
    let criteria = data("criteria.json");
    ok(&[
        "fit",
        "--dataset",
        p(&posts),
        "--signal-field",
        "label",
        "--signal-type",
        "discrete",
        "--criteria",
        p(&criteria),
        "--backend",
        "mock",
        "--mock-rule",
        "tagged",
        "--seed",
        "2",
        "--out",
        p(&model),
        "--judge-log",
        p(&log),
    ]);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert!(m["fit_metadata"]["decision_threshold"].is_f64());
    assert_eq!(m["fit_metadata"]["group_sizes"], serde_json::json!([40, 40]));
    // 4 judged criteria x 80 grouped texts
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 320);

    ok(&[
        "infer",
        "--model",
        p(&model),
        "--criteria",
        p(&criteria),
        "--input",
        p(&posts),
        "--backend",
        "mock",
        "--mock-rule",
        "tagged",
        "--seed",
        "2",
        "--out",
        p(&scored),
    ]);
    let lines = std::fs::read_to_string(&scored).unwrap();
    assert_eq!(lines.lines().count(), 120);
    for line in lines.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let sum: f64 = v["contributions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_f64().unwrap())
            .sum();
        assert!((sum - v["uniscore"].as_f64().unwrap()).abs() < 1e-12);
    }

    let report: Value = serde_json::from_str(&ok(&[
        "evaluate",
        "--scored",
        p(&scored),
        "--truth",
        p(&posts),
        "--signal-field",
        "label",
        "--mode",
        "discrete",
        "--model",
        p(&model),
        "--svg",
        p(&svg),
    ]))
    .unwrap();
    assert!(report["f1"].as_f64().unwrap() > 0.9);
    assert!(report.get("pearson_r").is_none());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn report_formats() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    ok(&["fit", "--config", p(&data("fit_reviews.json")), "--out", p(&model)]);
    let text = ok(&["report", "--model", p(&model)]);
    assert_eq!(text.lines().count(), 7);
    let json: Value = serde_json::from_str(&ok(&["report", "--model", p(&model), "--format", "json"])).unwrap();
    let rows = json["criteria"].as_array().unwrap();
    let total: f64 = rows.iter().map(|r| r["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(json["consistency_pass"], true);
}

#[test]
fn check_cr_summary() {
    let v: Value = serde_json::from_str(&ok(&["check-cr", "--m", "5", "--trials", "100", "--seed", "42"])).unwrap();
    assert_eq!(v["trials"], 100);
    assert_eq!(v["exceed_count"], 0);
    assert!(v["mean"].as_f64().unwrap() <= 0.05);
    assert_eq!(code(&["check-cr", "--m", "11"]), 1);
}

#[test]
fn ablate_table_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("a.svg");
    let rows: Value = serde_json::from_str(&ok(&[
        "ablate",
        "--config",
        p(&data("fit_reviews.json")),
        "--p",
        "0.001,0.05,0.1",
        "--svg",
        p(&svg),
    ]))
    .unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["ok"], false);
    assert!(rows[0]["reason"].as_str().unwrap().contains("too strict"));
    for r in &rows[1..] {
        assert!(r["spearman_rho"].is_f64() && r["kendall_tau"].is_f64() && r["pearson_r"].is_f64());
    }
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn partition_lists_groups() {
    let v: Value = serde_json::from_str(&ok(&[
        "partition",
        "--dataset",
        p(&data("reviews.jsonl")),
        "--id-field",
        "review_id",
        "--p",
        "0.05",
    ]))
    .unwrap();
    assert_eq!(v["sizes"], serde_json::json!([12, 12]));
    assert_eq!(v["low"].as_array().unwrap().len(), 12);
    let (lo, hi) = (
        v["thresholds"][0].as_f64().unwrap(),
        v["thresholds"][1].as_f64().unwrap(),
    );
    assert!(lo < hi);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("fit_reviews.json");
    assert_eq!(code(&["fit", "--bogus"]), 1);
    assert_eq!(code(&["fit", "--config", "/nonexistent/config.json"]), 1);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"partition\": 3}").unwrap();
    assert_eq!(code(&["fit", "--config", p(&bad)]), 1);
    assert_eq!(
        code(&["fit", "--config", p(&cfg), "--dataset", "/nonexistent.jsonl"]),
        1
    );
    // judge backend without an endpoint
    assert_eq!(code(&["fit", "--config", p(&cfg), "--backend", "judge"]), 1);
    // a percentile too strict for 240 samples fails inside the pipeline
    let out = uniscore(&[
        "fit",
        "--config",
        p(&cfg),
        "--p",
        "0.001",
        "--out",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage partition failed"));
    assert_eq!(code(&["--help"]), 0);
}

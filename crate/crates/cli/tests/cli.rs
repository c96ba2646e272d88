use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn btsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btsc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// 3x3 grid with 500 m blocks plus two lines.
fn fixture(dir: &Path) -> (String, String) {
    let map = dir.join("map.json");
    let lines = dir.join("lines.json");
    stdout(&btsc(&[
        "map",
        "gen",
        "--rows",
        "3",
        "--cols",
        "3",
        "--block",
        "500",
        "--out",
        map.to_str().unwrap(),
    ]));
    fs::write(
        &lines,
        r#"{"lines": [
            {"id": 0, "streets": [0, 1], "headway_s": 60},
            {"id": 1, "streets": [6, 2, 3], "headway_s": 60}
        ]}"#,
    )
    .unwrap();
    (
        map.to_str().unwrap().to_owned(),
        lines.to_str().unwrap().to_owned(),
    )
}

#[test]
fn map_gen_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let (map, _) = fixture(dir.path());
    let text = stdout(&btsc(&["map", "validate", &map]));
    assert_eq!(text.trim(), "ok: 9 intersections, 12 streets");
}

#[test]
fn graph_build_reports_weights_and_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let (map, lines) = fixture(dir.path());
    let doc: Value = serde_json::from_str(&stdout(&btsc(&[
        "graph", "build", "--map", &map, "--lines", &lines,
    ])))
    .unwrap();
    let weights = doc["weights"].as_object().unwrap();
    assert_eq!(weights.len(), 12);
    // Street 0 carries half of line 0 and nothing of line 1: P = 0.25.
    assert!((weights["0"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert!(doc.get("psc").is_some());
}

#[test]
fn plan_follows_the_covered_corridor() {
    let dir = tempfile::tempdir().unwrap();
    let (map, lines) = fixture(dir.path());
    let doc: Value = serde_json::from_str(&stdout(&btsc(&[
        "plan", "--map", &map, "--lines", &lines, "--src-x", "0", "--src-y", "0", "--dst-x",
        "1000", "--dst-y", "0", "-k", "3",
    ])))
    .unwrap();
    assert_eq!(doc["selected"]["streets"], serde_json::json!([0, 1]));
    assert!(!doc["candidates"].as_array().unwrap().is_empty());
}

#[test]
fn run_writes_csv_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"id": "tiny", "map": {"kind": "grid", "rows": 4, "cols": 4, "block_m": 300},
            "lines": {"kind": "synthetic", "count": 3}, "cars": 60, "buses": 9,
            "duration_s": 120, "warmup_s": 20, "deadline_s": 60,
            "packets": {"count": 10, "buckets": [[0, 500], [500, 1000]]}}"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let events = dir.path().join("events.jsonl");
    stdout(&btsc(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep",
        "radius",
        "--values",
        "150,250",
        "--out",
        csv.to_str().unwrap(),
        "--events",
        events.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(
        rows[0],
        "scenario_id,axis_value,generated,delivered,ratio,avg_delay_s,reroutes,failed_forwards"
    );
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("tiny-radius-150,150,10,"));
    let log = fs::read_to_string(&events).unwrap();
    let originates = log
        .lines()
        .filter(|l| l.contains("\"event\":\"originate\""))
        .count();
    assert_eq!(originates, 20);
}

#[test]
fn bad_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"radius_m": -5}"#).unwrap();
    let out = btsc(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, "{not json").unwrap();
    let out = btsc(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

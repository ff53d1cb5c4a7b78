//! End-to-end checks of the `regensim` binary.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regensim")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    serde_json::from_slice(&stdout(&full)).expect("valid JSON")
}

const SMALL: &[&[&str]] = &[
    &["renewal-verify", "--traces", "500", "--tv-traces", "5000", "--tv-grid", "1"],
    &["coupling", "--runs", "3000"],
    &["sample", "--method", "rs", "--n", "500"],
    &["sample", "--method", "rwm", "--target", "synthetic-unbounded", "--steps", "2000"],
    &["moments", "--M", "20000"],
    &["bias-sweep", "--M", "2000", "--moment-draws", "10000", "--t-grid", "1,10"],
    &["estimate", "--replicates", "20", "--moment-draws", "10000"],
    &["probit", "--N", "500", "--moment-draws", "10000", "--emit-acf", "20"],
];

#[test]
fn outputs_do_not_depend_on_worker_count() {
    for case in SMALL {
        let with = |w: &str| {
            let mut a = case.to_vec();
            a.extend(["--seed", "3", "--workers", w]);
            run(&a).stdout
        };
        let one = with("1");
        assert!(!one.is_empty(), "{case:?}");
        assert_eq!(one, with("8"), "{case:?}");
        assert_eq!(one, with("1"), "{case:?}");
    }
}

#[test]
fn seeds_change_the_output() {
    let a = stdout(&["sample", "--n", "50", "--seed", "1"]);
    let b = stdout(&["sample", "--n", "50", "--seed", "2"]);
    assert_ne!(a, b);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["sample", "--n", "20"]).status.code(), Some(0));
    // Too few traces for the TV tolerance.
    assert_eq!(run(&["renewal-verify", "--traces", "50", "--tv-traces", "50"]).status.code(), Some(1));
    assert_eq!(run(&["probit", "--data", "/nonexistent/lupus.txt"]).status.code(), Some(1));
    assert_eq!(run(&["sample", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["sample", "--n", "0"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "--level", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["bias-sweep", "--h", "id"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn csv_preamble_and_tables() {
    let out = String::from_utf8(stdout(&["sample", "--n", "30", "--seed", "9"])).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], format!("# tool: regensim {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(lines[1], "# command: sample");
    assert_eq!(lines[2], "# seed: 9");
    let config: Value = serde_json::from_str(lines[3].strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(config["args"]["n"], 30);
    assert!(lines.iter().any(|l| l.starts_with("# check: ")));
    assert!(lines.iter().any(|l| l.starts_with("# summary: ")));
    assert!(!out.contains("wall_seconds"));
    let at = lines.iter().position(|l| *l == "# table: points").unwrap();
    let body = lines[at + 1..].join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().next(), Some("x1"));
    assert_eq!(rdr.records().count(), 30);
}

#[test]
fn json_document_shape() {
    let doc = json(&["coupling", "--runs", "500", "--seed", "4"]);
    assert_eq!(doc["command"], "coupling");
    assert_eq!(doc["seed"], 4);
    assert!(doc["checks"].as_array().unwrap().iter().all(|c| c["pass"].is_boolean()));
    let t = &doc["tables"][0];
    assert_eq!(t["name"], "coupling");
    assert_eq!(t["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn timing_is_opt_in() {
    let doc = json(&["sample", "--n", "20", "--timing"]);
    assert!(doc["run"]["wall_seconds"].as_f64().unwrap() >= 0.0);
    let doc = json(&["sample", "--n", "20"]);
    assert!(doc["run"].get("wall_seconds").is_none());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# sampling run\nn = 40\nmethod = rs\n\nseed = 5\n").unwrap();
    let c = cfg.to_str().unwrap();
    let doc = json(&["sample", "--config", c]);
    assert_eq!(doc["config"]["args"]["n"], 40);
    assert_eq!(doc["config"]["args"]["method"], "rs");
    assert_eq!(doc["seed"], 5);
    let doc = json(&["sample", "--config", c, "--n", "7", "--seed", "6"]);
    assert_eq!(doc["config"]["args"]["n"], 7);
    assert_eq!(doc["seed"], 6);
    assert_eq!(doc["config"]["args"]["method"], "rs");

    std::fs::write(&cfg, "no-such-key = 1\n").unwrap();
    assert_eq!(run(&["sample", "--config", c]).status.code(), Some(2));
    std::fs::write(&cfg, "just words\n").unwrap();
    assert_eq!(run(&["sample", "--config", c]).status.code(), Some(2));
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn out_file_matches_stdout_and_leaves_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    let p = path.to_str().unwrap();
    let out = run(&["sample", "--n", "25", "--out", p]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), stdout(&["sample", "--n", "25"]));
    // Overwrite in place.
    assert_eq!(run(&["sample", "--n", "5", "--out", p]).status.code(), Some(0));
    assert_eq!(std::fs::read(&path).unwrap(), stdout(&["sample", "--n", "5"]));
    assert_eq!(entries(dir.path()), vec!["points.csv".to_string()]);
}

#[test]
fn probit_rrs_reports_the_mode_and_threshold() {
    let doc = json(&["probit", "--N", "10000", "--moment-draws", "200000"]);
    let map: Vec<f64> = doc["summary"]["map"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let want = [-1.777489, 4.373882, 2.428321];
    for (m, w) in map.iter().zip(want) {
        assert!((m - w).abs() < 1e-5, "{map:?}");
    }
    let t = doc["summary"]["t"].as_f64().unwrap();
    assert!((t - 0.7780).abs() < 0.05 * 0.7780, "t {t}");
    let names: Vec<&str> = doc["tables"][0]["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(names, ["intercept", "igg_diff", "iga"]);
}

#[test]
fn moments_dump_writes_cycle_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    stdout(&["moments", "--M", "5000", "--dump-w", path.to_str().unwrap()]);
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let ws: Vec<f64> = rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(ws.len(), 5000);
    assert!(ws.iter().all(|&w| w > 0.0));
}

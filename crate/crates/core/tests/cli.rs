use std::path::Path;
use std::process::{Command, Output};

use leadaug::container::load_container;

fn leadaug(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leadaug"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = leadaug(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn synth(dir: &Path, seed: &str, records: &str, name: &str) {
    ok(dir, &["--seed", seed, "synth", "--records", records, "--samples", "32", "-o", &format!("{name}.mwv"), "--labels", &format!("{name}.csv")]);
}

const TRAIN: &str = r#"{"features": {"downsample": 4, "standardize": true}, "learning_rate": 0.5, "steps": 30, "l2": 0.001}"#;

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = leadaug(tmp.path(), &["estimate-graph", "nope.mwv", "-o", "g.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_container_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.mwv"), b"MWV0garbage").unwrap();
    let out = leadaug(tmp.path(), &["estimate-graph", "bad.mwv", "-o", "g.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_policy_is_a_semantic_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "1", "20", "data");
    ok(d, &["estimate-graph", "data.mwv", "-o", "g.json"]);
    std::fs::write(d.join("p.json"), r#"{"graph": {"p": 1.5, "alpha": 0.5}, "standard_ops": [], "n_ops": 0, "gamma": 0}"#).unwrap();
    let out = leadaug(d, &["augment", "-i", "data.mwv", "-g", "g.json", "-p", "p.json", "-o", "o.mwv"]);
    assert_eq!(out.status.code(), Some(3));

    std::fs::write(d.join("q.json"), r#"{"graph": {"p": 0.5, "alpha": 0.5}, "standard_ops": [], "n_ops": 0, "gamma": 0}"#).unwrap();
    let out = leadaug(d, &["augment", "-i", "data.mwv", "-p", "q.json", "-o", "o.mwv"]);
    assert_eq!(out.status.code(), Some(3), "graph policy without a graph");
}

#[test]
fn unknown_flag_is_a_semantic_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(leadaug(tmp.path(), &["synth", "--bogus"]).status.code(), Some(3));
}

#[test]
fn identity_policy_reproduces_the_input_container() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "2", "30", "data");
    std::fs::write(d.join("id.json"), r#"{"graph": null, "standard_ops": [], "n_ops": 0, "gamma": 0}"#).unwrap();
    ok(d, &["augment", "-i", "data.mwv", "-p", "id.json", "-o", "out.mwv"]);
    assert_eq!(std::fs::read(d.join("data.mwv")).unwrap(), std::fs::read(d.join("out.mwv")).unwrap());
}

#[test]
fn augment_is_deterministic_and_shard_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "3", "50", "data");
    ok(d, &["estimate-graph", "data.mwv", "-o", "g.json", "--csv", "g.csv"]);
    std::fs::write(
        d.join("p.json"),
        r#"{"graph": {"p": 0.7, "alpha": 0.8}, "standard_ops": ["noise", "time_warp", "smooth", "mask"], "n_ops": 2, "gamma": 10}"#,
    )
    .unwrap();
    ok(d, &["--seed", "9", "augment", "-i", "data.mwv", "-g", "g.json", "-p", "p.json", "-o", "a.mwv"]);
    ok(d, &["--seed", "9", "--shards", "4", "augment", "-i", "data.mwv", "-g", "g.json", "-p", "p.json", "-o", "b.mwv"]);
    ok(d, &["--seed", "10", "augment", "-i", "data.mwv", "-g", "g.json", "-p", "p.json", "-o", "c.mwv"]);
    let a = std::fs::read(d.join("a.mwv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.mwv")).unwrap());
    assert_ne!(a, std::fs::read(d.join("c.mwv")).unwrap());
    assert_eq!(load_container(&d.join("a.mwv")).unwrap().len(), 50);

    let csv = std::fs::read_to_string(d.join("g.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn single_cell_search_writes_report_and_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "4", "80", "train");
    synth(d, "5", "40", "val");
    std::fs::write(d.join("train.json"), TRAIN).unwrap();
    std::fs::write(
        d.join("grid.json"),
        r#"{"gammas": [5], "n_ops": [1], "graph": [{"p": 1.0, "alpha": 0.5}], "standard_ops": ["mask"], "trials": 1}"#,
    )
    .unwrap();
    ok(d, &[
        "policy-search", "--train", "train.mwv", "--train-labels", "train.csv", "--val", "val.mwv", "--val-labels",
        "val.csv", "--grid", "grid.json", "--train-config", "train.json", "-o", "report.json", "--best-policy", "best.json",
    ]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 1);
    assert_eq!(report["best"], 0);
    let best: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("best.json")).unwrap()).unwrap();
    assert_eq!(best["gamma"], 5.0);
    assert_eq!(best["graph"]["alpha"], 0.5);
}

#[test]
fn subprocess_scorer_failure_is_numerical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "4", "20", "train");
    synth(d, "5", "10", "val");
    std::fs::write(
        d.join("grid.json"),
        r#"{"gammas": [5], "n_ops": [0], "graph": [null], "standard_ops": [], "trials": 1}"#,
    )
    .unwrap();
    let base = [
        "policy-search", "--train", "train.mwv", "--train-labels", "train.csv", "--val", "val.mwv", "--val-labels",
        "val.csv", "--grid", "grid.json", "-o", "report.json", "--scorer-cmd",
    ];
    let mut good = base.to_vec();
    good.push("test -f");
    let out = leadaug(d, &good);
    assert_eq!(out.status.code(), Some(4), "empty stdout is not a score");

    let mut echo = base.to_vec();
    echo.push("echo 0.625 #");
    ok(d, &echo);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["cells"][0]["mean"], 0.625);
}

#[test]
fn attack_eval_reports_one_row_per_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "6", "80", "train");
    synth(d, "7", "30", "test");
    std::fs::write(d.join("train.json"), TRAIN).unwrap();
    ok(d, &[
        "--seed", "3", "attack-eval", "--train", "train.mwv", "--train-labels", "train.csv", "--test", "test.mwv",
        "--test-labels", "test.csv", "--train-config", "train.json", "--eps", "0,0.05,0.1", "--steps", "5", "-o",
        "curve.csv", "--long-csv", "long.csv",
    ]);
    let text = std::fs::read_to_string(d.join("curve.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epsilon,macro_f1,n_records,seed");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[1].ends_with(",30,3"));
    let f1: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(f1.iter().all(|f| (0.0..=1.0).contains(f)));
    assert!(f1[2] <= f1[0]);

    let long = std::fs::read_to_string(d.join("long.csv")).unwrap();
    assert!(long.starts_with("policy,epsilon,macro_f1,n_records,seed"));
    assert_eq!(long.lines().count(), 4);
}

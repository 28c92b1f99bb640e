//! Golden runs of the command-line binary: output contracts and the
//! exit-code taxonomy (0 ok, 1 input, 2 infeasible, 3 invariant).

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_defectsim"))
}

fn write_tmp(dir: &tempfile::TempDir, name: &str, content: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const WORKED_COL1_P2: &str = r#"{
  "p": 2,
  "seed": { "type": "T2", "jac_ratio": "2/1" },
  "prefix": [],
  "tail": [ { "m": 2, "q": 1 }, { "m": 8, "q": 1 } ]
}"#;

#[test]
fn simulate_worked_column_reports_exact_distance() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(&dir, "col1.json", WORKED_COL1_P2);
    let out = bin()
        .args(["simulate", "--input"])
        .arg(&input)
        .args(["--depth", "8", "--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let last = text.trim_end().lines().last().unwrap();
    assert_eq!(last, "dist = -14/15 (exact)");
    assert!(text.contains("depth,type,c,jac_ratio,M,d_i,sigma"));
}

#[test]
fn simulate_empty_schedule_gives_seed_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(
        &dir,
        "empty.json",
        r#"{"p":2,"seed":{"type":"T1","jac_ratio":"1"},"prefix":[],"tail":null}"#,
    );
    let out = bin()
        .args(["simulate", "--input"])
        .arg(&input)
        .args(["--depth", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn simulate_rejects_illegal_gcd_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(
        &dir,
        "bad.json",
        r#"{"p":2,"seed":{"type":"T1","jac_ratio":"1"},"prefix":[{"m":4,"q":2}],"tail":null}"#,
    );
    let out = bin()
        .args(["simulate", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("gcd(4, 2)"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn distance_command_outputs_bound() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(&dir, "col1.json", WORKED_COL1_P2);
    let out = bin()
        .args(["distance", "--input"])
        .arg(&input)
        .args(["--depth", "6"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rendered"], "dist = -14/15 (exact)");
    assert_eq!(v["distance"]["exact"], true);
}

#[test]
fn synthesize_command_realizes_plan() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(
        &dir,
        "synth.json",
        r#"{
          "params": { "p": 2, "p_aux": 3, "e": 1, "alpha": "1/2", "depth": 10 },
          "plan": { "prefix": [], "tail": [1, 2] }
        }"#,
    );
    let out = bin()
        .args(["synthesize", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["envelope_ok"], true);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 11);
    // realized types alternate per the plan: positions 1, 2 carry 2, 1
    assert_eq!(rows[1]["type"], "T2");
    assert_eq!(rows[2]["type"], "T1");
}

#[test]
fn synthesize_rejects_bad_params_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(
        &dir,
        "synth.json",
        r#"{
          "params": { "p": 2, "p_aux": 2, "e": 1, "alpha": "0", "depth": 4 },
          "plan": { "prefix": [], "tail": [1] }
        }"#,
    );
    let out = bin()
        .args(["synthesize", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tower_worked_command_renders_both_distances() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(
        &dir,
        "tower.json",
        r#"{"op":"worked","p":2,"c":1,"depth":6}"#,
    );
    let out = bin()
        .args(["tower", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(
        v["rendered"],
        "dist(level 1) = -14/15 (exact), dist(level 2) = -11/15 (exact)"
    );
}

#[test]
fn tower_independent_command_audits() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(
        &dir,
        "tower.json",
        r#"{"op":"independent","p":2,"depth":6}"#,
    );
    let out = bin()
        .args(["tower", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["all_not_strongly_monomial"], true);
}

#[test]
fn oracle_command_passes_and_is_seed_stable() {
    let run = |seed: &str| {
        let out = bin()
            .args([
                "oracle",
                "--cases",
                "25",
                "--seed",
                seed,
                "--precision",
                "64",
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        stdout(&out)
    };
    assert_eq!(run("7"), run("7"));
}

#[test]
fn oracle_rejects_low_precision() {
    let out = bin()
        .args(["oracle", "--cases", "5", "--precision", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_merges_mixed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // first worked-example column at p = 2 and at p = 3
    let col1_p2 = write_tmp(&dir, "col1_p2.json", WORKED_COL1_P2);
    let col1_p3 = write_tmp(
        &dir,
        "col1_p3.json",
        r#"{"p":3,"seed":{"type":"T2","jac_ratio":"2/1"},"prefix":[],
            "tail":[{"m":3,"q":1},{"m":27,"q":1}]}"#,
    );
    let json_out = dir.path().join("run1.json");
    let csv_out = dir.path().join("run2.csv");

    let s1 = bin()
        .args(["simulate", "--input"])
        .arg(&col1_p2)
        .args(["--depth", "6", "--output"])
        .arg(&json_out)
        .output()
        .unwrap();
    assert_eq!(s1.status.code(), Some(0));
    let s2 = bin()
        .args(["simulate", "--input"])
        .arg(&col1_p3)
        .args(["--depth", "6", "--format", "csv", "--output"])
        .arg(&csv_out)
        .output()
        .unwrap();
    assert_eq!(s2.status.code(), Some(0));

    let merged = bin()
        .args(["report", "--input"])
        .arg(&json_out)
        .arg(&csv_out)
        .args(["--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(merged.status.code(), Some(0), "stderr: {}", stderr(&merged));
    let text = stdout(&merged);
    let lines: Vec<&str> = text.trim_end().lines().collect();
    assert_eq!(lines.len(), 3); // header + two rows, sorted by p
    assert!(lines[1].starts_with("2,") && lines[1].contains("14/15"));
    assert!(lines[2].starts_with("3,") && lines[2].contains("79/80"));
    assert!(lines[1].ends_with("true") && lines[2].ends_with("true"));

    // empty input list: empty table, exit 0
    let empty = bin().args(["report", "--format", "csv"]).output().unwrap();
    assert_eq!(empty.status.code(), Some(0));
}

#[test]
fn infeasible_tail_exits_two() {
    // the tail's ratio recursion collapses (and in fact unramifies), so
    // no distance certificate exists
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(
        &dir,
        "infeasible.json",
        r#"{"p":2,"seed":{"type":"T1","jac_ratio":"3"},"prefix":[],"tail":[{"m":2,"q":5}]}"#,
    );
    let out = bin()
        .args(["simulate", "--input"])
        .arg(&input)
        .args(["--depth", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn invariant_violation_exits_three() {
    // type-2 step with ratio 1 and sigma = 1 drives the exponent to zero
    let dir = tempfile::tempdir().unwrap();
    let input = write_tmp(
        &dir,
        "violate.json",
        r#"{"p":2,"seed":{"type":"T2","jac_ratio":"1"},"prefix":[{"m":3,"q":1}],"tail":null}"#,
    );
    let out = bin()
        .args(["simulate", "--input"])
        .arg(&input)
        .args(["--depth", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sharpomp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharpomp"))
        .args(args)
        .current_dir(dir)
        .env("OMP_SHARP_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn example1_naive_rule_returns_both_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = sharpomp(d, &["construct", "example1", "--delta", "0.1", "--matrix-out", "a.txt", "--measurement-out", "y.txt"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = sharpomp(d, &["omp", "run", "--matrix", "a.txt", "--measurement", "y.txt", "--rule", "naive-linf:1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let trace = json(&out);
    assert_eq!(trace["final_support"], serde_json::json!([1, 2]));
    assert_eq!(trace["iteration_count"], 2);
}

#[test]
fn example1_sharp_rule_stops_after_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(sharpomp(d, &["construct", "example1", "--delta", "0.1", "-o", "e1.json"]).status.success());
    let out = sharpomp(d, &["omp", "run", "--instance", "e1.json", "--rule", "linf:1", "--sparsity", "2", "--exact-ric"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["final_support"], serde_json::json!([1]));
    assert!(stderr(&out).contains("linf stopping threshold"));
}

#[test]
fn zero_measurement_runs_no_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.txt"), "1,0,0.5\n0,1,0.5\n").unwrap();
    fs::write(d.join("y.txt"), "0\n0\n").unwrap();
    let out = sharpomp(d, &["omp", "run", "--matrix", "a.txt", "--measurement", "y.txt", "--rule", "l2:1", "-o", "t.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let trace: Value = serde_json::from_str(&fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    assert_eq!(trace["final_support"], serde_json::json!([]));
    assert_eq!(trace["iteration_count"], 0);
}

#[test]
fn mismatched_dimensions_fail() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.txt"), "1,0\n0,1\n").unwrap();
    fs::write(d.join("y.txt"), "1,2,3\n").unwrap();
    let out = sharpomp(d, &["omp", "run", "--matrix", "a.txt", "--measurement", "y.txt", "--rule", "fixed:1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("dimension mismatch"), "{}", stderr(&out));
}

#[test]
fn parse_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.txt"), "1,0\n0,oops\n").unwrap();
    let out = sharpomp(d, &["ric", "--matrix", "a.txt", "--order", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(sharpomp(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(sharpomp(d, &["ric", "--order", "2"]).status.code(), Some(2));
    fs::write(d.join("a.txt"), "1,0\n0,1\n").unwrap();
    fs::write(d.join("y.txt"), "1\n0\n").unwrap();
    let bad_rule = sharpomp(d, &["omp", "run", "--matrix", "a.txt", "--measurement", "y.txt", "--rule", "lasso:1"]);
    assert_eq!(bad_rule.status.code(), Some(2));
    let no_k = sharpomp(d, &["omp", "run", "--matrix", "a.txt", "--measurement", "y.txt", "--rule", "linf:1"]);
    assert_eq!(no_k.status.code(), Some(2));
    for cmd in [&["omp", "run", "--help"][..], &["ric", "--help"], &["construct", "--help"], &["experiment", "--help"]] {
        assert_eq!(sharpomp(d, cmd).status.code(), Some(0));
    }
}

#[test]
fn ric_of_identity_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("i.txt"), "1,0,0\n0,1,0\n0,0,1\n").unwrap();
    let out = sharpomp(d, &["ric", "--matrix", "i.txt", "--order", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["delta"].as_f64(), Some(0.0));
}

#[test]
fn l2_construction_certifies_delta_and_ric_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = sharpomp(
        d,
        &["construct", "l2", "--k", "2", "--delta", "0.4", "--epsilon", "1", "--gamma-fraction", "0.9", "-o", "i.json", "--matrix-out", "a.txt"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cert = &json(&out)["certification"];
    assert!((cert["delta_exact"].as_f64().unwrap() - 0.4).abs() <= 1e-10);
    assert_eq!(cert["noise_within_bound"], true);
    assert_eq!(cert["first_selected"], 3);
    assert_eq!(cert["first_selected_in_support"], false);

    let out = sharpomp(d, &["ric", "--matrix", "a.txt", "--order", "3", "--all-orders"]);
    let reports = json(&out);
    let deltas: Vec<f64> = reports.as_array().unwrap().iter().map(|r| r["delta"].as_f64().unwrap()).collect();
    assert_eq!(deltas.len(), 3);
    assert!((deltas[2] - 0.4).abs() <= 1e-10);
    assert!(deltas.windows(2).all(|w| w[0] <= w[1] + 1e-12));

    // the instance file reloads and OMP picks the off-support column first
    let out = sharpomp(d, &["omp", "run", "--instance", "i.json", "--rule", "fixed:2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["iterations"][0]["selected_index"], 3);
}

#[test]
fn instance_json_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(sharpomp(d, &["construct", "l2", "--k", "3", "--delta", "0.3", "-o", "i.json"]).status.success());
    let text = fs::read_to_string(d.join("i.json")).unwrap();
    let inst: sharpomp_core::Instance = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&inst).unwrap() + "\n";
    assert_eq!(text, again);
}

#[test]
fn linf_construction_has_unit_noise_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = sharpomp(dir.path(), &["construct", "linf", "--k", "1", "--delta", "0.6", "--epsilon", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cert = &json(&out)["certification"];
    assert!((cert["noise_level"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn example2_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = sharpomp(dir.path(), &["construct", "example2", "--delta", "0.8"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("out of range"));
}

#[test]
fn budget_overrun_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let row: Vec<String> = (0..20).map(|j| if j == 0 { "1".into() } else { "0".into() }).collect();
    let text: String = (0..20).map(|i| {
        let mut r = row.clone();
        r.rotate_right(i);
        r.join(",") + "\n"
    }).collect();
    fs::write(d.join("a.txt"), text).unwrap();
    let out = sharpomp(d, &["ric", "--matrix", "a.txt", "--order", "5", "--budget", "100"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("15504"), "{}", stderr(&out));
}

#[test]
fn experiment_is_reproducible_and_demonstrates_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cfg.json"),
        r#"{"experiment": "Theorem3Demo", "seed": 7, "k": [1, 2, 4], "delta_fractions": [0.5, 0.9]}"#,
    )
    .unwrap();
    let run = |csv: &str, summary: &str| {
        let out = sharpomp(d, &["experiment", "--config", "cfg.json", "-o", csv, "--summary", summary]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        fs::read(d.join(csv)).unwrap()
    };
    let first = run("a.csv", "a.json");
    let second = run("b.csv", "b.json");
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("sharpomp_trials_v1,"));
    assert!(!text.contains('\r'));
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.join("a.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"], 6);
    assert_eq!(summary["passed"], 6);

    let col = text.lines().next().unwrap().split(',').position(|h| h == "support_recovered").unwrap();
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').nth(col), Some("false"));
    }
}

#[test]
fn comparison_table_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), r#"{"experiment": "ComparisonTable", "seed": 1, "k": [1, 10, 100]}"#).unwrap();
    let out = sharpomp(d, &["experiment", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("sharpomp_comparison_v1,"));
    let summary: Value = serde_json::from_str(&stderr(&out)).unwrap();
    assert_eq!(summary["failed"], 0);
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), r#"{"experiment": "Theorem1Sweep", "seed": 1, "k": [], "delta_fractions": [0.5]}"#).unwrap();
    assert_eq!(sharpomp(d, &["experiment", "--config", "cfg.json"]).status.code(), Some(2));
    fs::write(d.join("cfg.json"), r#"{"experiment": "Theorem1Sweep", "seed": 1, "colour": 3}"#).unwrap();
    assert_eq!(sharpomp(d, &["experiment", "--config", "cfg.json"]).status.code(), Some(2));
}

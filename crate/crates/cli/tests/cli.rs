//! End-to-end tests of the `clickmech` binary: determinism contracts,
//! error diagnostics, and the verify/sweep/demo flows.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clickmech"))
}

fn write_two_agent_instance(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("two_agents.json");
    fs::write(
        &path,
        r#"{"agents": 2, "horizon": 5, "ads": [
            {"owner": 0, "value": 1.0, "ctr": 1.0},
            {"owner": 1, "value": 0.0, "ctr": 0.5}
        ]}"#,
    )
    .unwrap();
    path
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn simulate_is_byte_identical_across_reruns_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let instance = write_two_agent_instance(dir.path());
    let out_dir = dir.path().join("out");
    let run = |threads: &str| {
        let output = bin()
            .args([
                "simulate",
                "--instance",
                instance.to_str().unwrap(),
                "--rule",
                "all",
                "--delta",
                "0.1",
                "--trials",
                "400",
                "--seed",
                "7",
                "--threads",
                threads,
                "--out-dir",
                out_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", stderr(&output));
        (
            fs::read(out_dir.join("trials.csv")).unwrap(),
            fs::read(out_dir.join("summary.json")).unwrap(),
        )
    };
    let (csv1, json1) = run("1");
    let (csv2, json2) = run("1");
    assert_eq!(csv1, csv2, "rerun must be byte-identical");
    assert_eq!(json1, json2);
    let (csv4, json4) = run("4");
    assert_eq!(csv1, csv4, "thread count must not change results");
    assert_eq!(json1, json4);

    // the trial CSV carries the contract columns
    let text = String::from_utf8(csv1).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "trial,chi_1,chi_2,payment_1,payment_2,welfare,matched,seed,config_hash"
    );
    assert_eq!(text.lines().count(), 401);
}

#[test]
fn bid_independent_rule_always_matches() {
    let dir = tempfile::tempdir().unwrap();
    let instance = write_two_agent_instance(dir.path());
    let out_dir = dir.path().join("out");
    let output = bin()
        .args([
            "simulate",
            "--instance",
            instance.to_str().unwrap(),
            "--rule",
            "rand",
            "--delta",
            "0.4",
            "--trials",
            "300",
            "--seed",
            "1",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["match_frequency"], 1.0);
    assert_eq!(summary["schema_version"], 1);
    assert!(summary["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn invalid_instance_gives_diagnostic_and_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"agents": 1, "horizon": 2, "ads": [{"owner": 0, "value": 1.5, "ctr": 0.5}]}"#,
    )
    .unwrap();
    let output = bin()
        .args(["simulate", "--instance", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(stderr(&output).contains("outside [0, 1]"), "{}", stderr(&output));

    let output = bin().args(["simulate"]).output().unwrap();
    assert!(!output.status.success());
    assert!(stderr(&output).contains("instance file is required"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let instance = write_two_agent_instance(dir.path());
    let config_path = dir.path().join("exp.json");
    fs::write(&config_path, r#"{"rule": "rand", "trials": 50}"#).unwrap();
    let out_dir = dir.path().join("out");
    let output = bin()
        .args([
            "simulate",
            "--instance",
            instance.to_str().unwrap(),
            "--rule",
            "all",
            "--trials",
            "9999",
            "--config",
            config_path.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rule"], "rand");
    assert_eq!(summary["trials"], 50);
}

#[test]
fn verify_reports_expected_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let instance = write_two_agent_instance(dir.path());
    let out_dir = dir.path().join("rep");
    let output = bin()
        .args([
            "verify",
            "--instance",
            instance.to_str().unwrap(),
            "--rule",
            "all",
            "--checks",
            "cmon,welfare,hessian,thresholds",
            "--trials",
            "5000",
            "--seed",
            "3",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["all_expected"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 4);

    // greedy is expected to violate weak monotonicity; exit code stays 0
    // because the violation is the expected verdict
    let out_dir2 = dir.path().join("rep2");
    let smaller = dir.path().join("small.json");
    fs::write(
        &smaller,
        r#"{"agents": 1, "horizon": 2, "ads": [
            {"owner": 0, "value": 0.5, "ctr": 0.5},
            {"owner": 0, "value": 0.5, "ctr": 0.5}
        ]}"#,
    )
    .unwrap();
    let output = bin()
        .args([
            "verify",
            "--instance",
            smaller.to_str().unwrap(),
            "--rule",
            "greedy",
            "--checks",
            "wmon",
            "--out-dir",
            out_dir2.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir2.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["verdict"], "violation");
    assert!(out_dir2.join("witnesses_wmon.csv").exists());

    // unknown checks are rejected
    let output = bin()
        .args([
            "verify",
            "--instance",
            instance.to_str().unwrap(),
            "--checks",
            "nonsense",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(stderr(&output).contains("unknown check"));
}

#[test]
fn sweep_tracks_the_moment_gap() {
    let dir = tempfile::tempdir().unwrap();
    let instance = write_two_agent_instance(dir.path());
    let out_dir = dir.path().join("swp");
    let output = bin()
        .args([
            "sweep",
            "--instance",
            instance.to_str().unwrap(),
            "--parameter",
            "sigma",
            "--values",
            "0.0,0.5,1.0",
            "--delta",
            "0.05",
            "--trials",
            "2000",
            "--seed",
            "5",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let text = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    // moving ad 0's value from 0 to 1 moves the exploit gap with it:
    // products (v, 0) over two ads give gap v^2 / 4
    for (row, v) in rows.iter().zip([0.0f64, 0.5, 1.0]) {
        let gap: f64 = row[col("exploit_gap")].parse().unwrap();
        assert!((gap - v * v / 4.0).abs() < 1e-12, "value {v}: gap {gap}");
    }
    // the v = 0 row is a degenerate profile, flagged rather than numeric
    assert_eq!(rows[0][col("sigma")], "degenerate");
    let sigma_high: f64 = rows[2][col("sigma")].parse().unwrap();
    assert!((sigma_high - 2.0).abs() < 1e-12);
}

#[test]
fn single_agent_simulation_hits_the_closed_form() {
    // m = 2, unit values and CTRs, T = 2: total expected welfare is
    // 2/3 + 8/9 = 14/9 in the small-delta limit; 1e5 trials land within
    // the 3-sigma band
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("single.json");
    fs::write(
        &path,
        r#"{"agents": 1, "horizon": 2, "ads": [
            {"owner": 0, "value": 1.0, "ctr": 1.0},
            {"owner": 0, "value": 1.0, "ctr": 1.0}
        ]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let output = bin()
        .args([
            "simulate",
            "--instance",
            path.to_str().unwrap(),
            "--rule",
            "all-single",
            "--delta",
            "0.005",
            "--trials",
            "100000",
            "--seed",
            "12",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let mean = summary["mean_welfare"].as_f64().unwrap();
    let ci99 = summary["welfare_ci99"].as_f64().unwrap();
    let band = 3.0 * ci99 / 2.5758293035489004; // back to 3 sigma
    assert!(
        (mean - 14.0 / 9.0).abs() <= band + 6e-4,
        "mean {mean} vs 14/9 (band {band})"
    );
}

#[test]
fn horizon_sweep_scales_baselines_linearly() {
    let dir = tempfile::tempdir().unwrap();
    let instance = write_two_agent_instance(dir.path());
    let out_dir = dir.path().join("swp");
    let output = bin()
        .args([
            "sweep",
            "--instance",
            instance.to_str().unwrap(),
            "--parameter",
            "horizon",
            "--values",
            "3,6",
            "--trials",
            "500",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let text = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let rand3: f64 = rows[0][7].parse().unwrap();
    let rand6: f64 = rows[1][7].parse().unwrap();
    assert!((rand6 - 2.0 * rand3).abs() < 1e-12);

    // non-integer horizons are rejected
    let output = bin()
        .args([
            "sweep",
            "--instance",
            instance.to_str().unwrap(),
            "--parameter",
            "horizon",
            "--values",
            "2.5",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(stderr(&output).contains("integer"));
}

#[test]
fn demo_negative_prints_the_witness() {
    let output = bin().args(["demo-negative"]).output().unwrap();
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("violation found"), "{text}");
    assert!(text.contains("directional product"), "{text}");
}

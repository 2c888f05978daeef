//! End-to-end CLI checks: exit codes, diagnostics, golden files, and
//! run-to-run reproducibility of every output artifact.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_halpern-lab")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("halpern-lab-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn halpern-lab")
}

#[test]
fn simulate_identity_matches_golden_trajectory() {
    let out = tmp_dir("golden");
    let output = run(&[
        "simulate",
        "--config",
        config("identity_smoke.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let got = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let golden = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/identity_trajectory.csv"),
    )
    .unwrap();
    assert_eq!(got, golden, "trajectory.csv deviates from the golden file");
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn simulate_is_reproducible_byte_for_byte() {
    let out1 = tmp_dir("repro1");
    let out2 = tmp_dir("repro2");
    for out in [&out1, &out2] {
        let output = run(&[
            "simulate",
            "--config",
            config("rotation_halpern.json").to_str().unwrap(),
            "--paths",
            "64",
            "--horizon",
            "50",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    }
    for file in ["trajectory.csv", "means.csv", "summary.json"] {
        let a = fs::read(out1.join(file)).unwrap();
        let b = fs::read(out2.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let _ = fs::remove_dir_all(&out1);
    let _ = fs::remove_dir_all(&out2);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let out1 = tmp_dir("thr1");
    let out2 = tmp_dir("thr2");
    for (out, threads) in [(&out1, "1"), (&out2, "4")] {
        let output = run(&[
            "simulate",
            "--config",
            config("rotation_halpern.json").to_str().unwrap(),
            "--paths",
            "96",
            "--horizon",
            "40",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    assert_eq!(
        fs::read(out1.join("means.csv")).unwrap(),
        fs::read(out2.join("means.csv")).unwrap()
    );
    let _ = fs::remove_dir_all(&out1);
    let _ = fs::remove_dir_all(&out2);
}

#[test]
fn malformed_norm_exits_2_naming_the_field() {
    let dir = tmp_dir("badnorm");
    fs::create_dir_all(&dir).unwrap();
    let bad = fs::read_to_string(config("identity_smoke.json"))
        .unwrap()
        .replace("euclidean", "euclidish");
    let path = dir.join("bad.json");
    fs::write(&path, bad).unwrap();
    let output = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("norm"), "stderr: {stderr}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn zero_paths_is_a_validation_error() {
    let output = run(&[
        "verify",
        "--config",
        config("identity_smoke.json").to_str().unwrap(),
        "--paths",
        "0",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn verify_identity_smoke_passes() {
    let out = tmp_dir("verify-id");
    let output = run(&[
        "verify",
        "--config",
        config("identity_smoke.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(parsed["fail"], 0);
    assert!(parsed["config_digest"].as_str().unwrap().len() == 16);
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn verify_negative_control_fails_with_exit_1() {
    let out = tmp_dir("verify-neg");
    let output = run(&[
        "verify",
        "--config",
        config("negative_control.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["fail"].as_u64().unwrap() > 0);
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn rates_table_is_monotone_in_eps() {
    let out = tmp_dir("rates");
    let output = run(&[
        "rates",
        "--config",
        config("rotation_halpern.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let table = fs::read_to_string(out.join("rates.csv")).unwrap();
    // for each (quantity, origin, lambda) the index must not shrink as eps
    // shrinks (grid is descending)
    use std::collections::HashMap;
    let mut last: HashMap<(String, String, String), u64> = HashMap::new();
    for line in table.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 8 || cols[7].contains("SKIPPED") {
            continue;
        }
        let (q, eps, lambda, index, origin) = (cols[0], cols[1], cols[2], cols[3], cols[4]);
        if index.is_empty() {
            continue;
        }
        let key = (q.to_string(), origin.to_string(), lambda.to_string());
        let idx: u64 = index.parse().unwrap();
        if let Some(prev) = last.get(&key) {
            assert!(idx >= *prev, "index shrank for {key:?} at eps={eps}");
        }
        last.insert(key, idx);
    }
    assert!(!last.is_empty(), "no OK rows parsed");
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn qlearn_cycle_reports_oracle_match() {
    let out = tmp_dir("qlearn");
    let output = run(&[
        "qlearn",
        "--config",
        config("qlearn_cycle.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("qsummary.json")).unwrap()).unwrap();
    assert!((summary["rho_star"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(summary["policy_match_fraction"], 1.0);
    assert_eq!(summary["cross_check_exact"], true);
    let csv = fs::read_to_string(out.join("qlearn.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("n,sup_residual,greedy_policy_digest,matches_oracle"));
    let _ = fs::remove_dir_all(&out);
}

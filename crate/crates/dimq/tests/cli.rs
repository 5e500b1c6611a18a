//! End-to-end tests of the `dimq` binary: exit codes, flag/config
//! precedence, and artifact round trips.

use std::fs;
use std::path::Path;
use std::process::Command;

fn dimq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dimq"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn usage_errors_exit_1() {
    let out = dimq().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // missing required --out
    let out = dimq().args(["gen-data"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // bad config value
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[train]\ngamma = -1.0\n").unwrap();
    let out = dimq()
        .args(["verify-tabular", "--trials", "1"])
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // unknown config key
    fs::write(&cfg, "[train]\ngama = 0.9\n").unwrap();
    let out = dimq()
        .args(["verify-tabular", "--trials", "1"])
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_2() {
    let out = dimq()
        .args(["train", "--data", "/nonexistent/data.jsonl", "--out-dir", "/tmp/dimq-nowhere"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_tabular_pass_and_mutation_failure() {
    let out = dimq()
        .args(["verify-tabular", "--trials", "10", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("consistency: PASS"));
    assert!(text.contains("contraction: PASS"));
    assert!(text.contains("fixed-point: PASS"));

    // hidden hook: flipping the within-timestep discount must fail
    let out = dimq()
        .args([
            "verify-tabular",
            "--trials",
            "5",
            "--intra-discount",
            "0.9",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("consistency: FAIL"));

    // vacuous pass with a warning
    let out = dimq()
        .args(["verify-tabular", "--trials", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("warning"));
}

fn gen_small_dataset(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data.jsonl");
    run_ok(dimq().args([
        "gen-data",
        "--episodes",
        "40",
        "--demo-fraction",
        "0.25",
        "--noise",
        "0.3",
        "--data-seed",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]));
    data
}

#[test]
fn gen_data_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let stdout = run_ok(dimq().args([
        "gen-data",
        "--episodes",
        "50",
        "--demo-fraction",
        "0.08",
        "--out",
        data.to_str().unwrap(),
    ]));
    assert!(stdout.contains("4 demos all successful"), "{stdout}");
    let text = fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn train_is_byte_deterministic_and_eval_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small_dataset(dir.path());
    let args = |out: &str| {
        vec![
            "train".to_string(),
            "--data".into(),
            data.to_str().unwrap().into(),
            "--out-dir".into(),
            out.into(),
            "--grad-steps".into(),
            "30".into(),
            "--batch-size".into(),
            "8".into(),
            "--width".into(),
            "8".into(),
            "--blocks".into(),
            "1".into(),
            "--eval-every".into(),
            "15".into(),
            "--eval-episodes".into(),
            "10".into(),
            "--metrics-every".into(),
            "10".into(),
            "--seed".into(),
            "9".into(),
        ]
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_ok(dimq().args(args(out_a.to_str().unwrap())));
    run_ok(dimq().args(args(out_b.to_str().unwrap())));
    let metrics_a = fs::read(out_a.join("metrics.csv")).unwrap();
    let metrics_b = fs::read(out_b.join("metrics.csv")).unwrap();
    assert_eq!(metrics_a, metrics_b);
    let ck_a = fs::read(out_a.join("checkpoint.txt")).unwrap();
    let ck_b = fs::read(out_b.join("checkpoint.txt")).unwrap();
    assert_eq!(ck_a, ck_b);

    // metrics carry the resolved config for provenance
    let text = String::from_utf8(metrics_a).unwrap();
    assert!(text.starts_with('#'));
    assert!(text.contains("resolved config:"));
    assert!(text.contains("seed = 9"));

    // eval loads the checkpoint and writes a JSON report
    let report = dir.path().join("report.json");
    let stdout = run_ok(dimq().args([
        "eval",
        "--checkpoint",
        out_a.join("checkpoint.txt").to_str().unwrap(),
        "--episodes",
        "10",
        "--eval-seed",
        "4",
        "--out",
        report.to_str().unwrap(),
    ]));
    assert!(stdout.contains("success rate"));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["episodes"], 10);
    assert!(doc["checkpoint_config"]["seed"].is_number());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[train]\nseed = 5\ngrad_steps = 1\n[model]\nwidth = 8\nblocks = 1\n").unwrap();
    let data = gen_small_dataset(dir.path());
    let out = dir.path().join("run");
    run_ok(
        dimq()
            .arg("--config")
            .arg(&cfg)
            .args([
                "train",
                "--data",
                data.to_str().unwrap(),
                "--out-dir",
                out.to_str().unwrap(),
                "--seed",
                "11",
                "--eval-every",
                "0",
                "--metrics-every",
                "0",
            ]),
    );
    let saved = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(saved.contains("seed = 11"), "flag must beat config file");
    assert!(saved.contains("width = 8"), "config file must beat defaults");
}

#[test]
fn ablate_writes_table_with_cached_cells() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small_dataset(dir.path());
    let table = dir.path().join("ablations.csv");
    run_ok(dimq().args([
        "ablate",
        "--data",
        data.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
        "--seeds",
        "2",
        "--grad-steps",
        "10",
        "--batch-size",
        "4",
        "--width",
        "8",
        "--blocks",
        "1",
        "--eval-every",
        "5",
        "--eval-episodes",
        "5",
        "--metrics-every",
        "0",
    ]));
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6, "header + 5 default cells:\n{text}");
    assert!(rows[0].starts_with("cell,conservatism"));
    assert!(text.contains("full,"));
    assert!(text.contains("one-step,"));
}

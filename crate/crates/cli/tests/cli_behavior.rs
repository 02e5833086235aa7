//! Black-box tests of the `longtail` binary: exit codes, config handling,
//! and the byte-level output contracts.

use std::path::Path;
use std::process::{Command, Output};

fn longtail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longtail"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

fn read_text(dir: &Path, name: &str) -> String {
    String::from_utf8(read(dir, name)).unwrap()
}

/// Manifest bytes with the timestamp line dropped — the one field excluded
/// from byte-identity.
fn without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|line| !line.starts_with("timestamp="))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Small, fast experiment shared by the happy-path tests.
fn small_args<'a>(out: &'a str) -> Vec<&'a str> {
    vec![
        "--out",
        out,
        "--n-max",
        "60",
        "--ratio",
        "6",
        "--val-per-class",
        "10",
        "--test-per-class",
        "10",
        "--epoch-max",
        "10",
        "--batch-size",
        "16",
        "--hidden",
        "8",
    ]
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&longtail(&["--help"])), 0);
    assert_eq!(code(&longtail(&["--version"])), 0);
    assert_eq!(code(&longtail(&["train", "--help"])), 0);
}

#[test]
fn bad_usage_exits_one() {
    // Unknown flag, unknown subcommand, no subcommand.
    assert_eq!(code(&longtail(&["generate", "--definitely-not-a-flag"])), 1);
    assert_eq!(code(&longtail(&["transmogrify"])), 1);
    assert_eq!(code(&longtail(&[])), 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let bad_ratio = longtail(&["generate", "--out", out, "--ratio", "0.5"]);
    assert_eq!(code(&bad_ratio), 1);
    assert!(stderr(&bad_ratio).contains("ratio"), "{}", stderr(&bad_ratio));

    let no_alpha = longtail(&["train", "--out", out, "--loss", "mse-ol"]);
    assert_eq!(code(&no_alpha), 1);
    assert!(stderr(&no_alpha).contains("alpha"), "{}", stderr(&no_alpha));

    let zero_alpha = longtail(&["train", "--out", out, "--loss", "mse-ol", "--alpha", "0"]);
    assert_eq!(code(&zero_alpha), 1);

    let empty_alphas = longtail(&["sweep-alpha", "--out", out, "--alphas", ""]);
    assert_eq!(code(&empty_alphas), 1);

    let big_batch = longtail(&["train", "--out", out, "--n-max", "20", "--ratio", "2", "--batch-size", "500"]);
    assert_eq!(code(&big_batch), 1);
    assert!(stderr(&big_batch).contains("batch-size"), "{}", stderr(&big_batch));
}

#[test]
fn unknown_config_key_exits_one_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.toml");
    std::fs::write(&config_path, "coolness = 11\n").unwrap();
    let output = longtail(&["generate", "--config", config_path.to_str().unwrap()]);
    assert_eq!(code(&output), 1);
    assert!(stderr(&output).contains("coolness"), "{}", stderr(&output));
}

#[test]
fn missing_inputs_exit_two_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let no_data = longtail(&["train", "--out", out]);
    assert_eq!(code(&no_data), 2);
    assert!(stderr(&no_data).contains("train.csv"), "{}", stderr(&no_data));

    let no_ckpt = longtail(&["evaluate", "--out", out]);
    assert_eq!(code(&no_ckpt), 2);
    assert!(stderr(&no_ckpt).contains("model.ckpt"), "{}", stderr(&no_ckpt));

    let no_ckpt_features = longtail(&["dump-features", "--out", out]);
    assert_eq!(code(&no_ckpt_features), 2);
    assert!(
        stderr(&no_ckpt_features).contains("model.ckpt"),
        "{}",
        stderr(&no_ckpt_features)
    );
}

#[test]
fn generate_rerun_is_byte_identical_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["generate"];
    args.extend(small_args(out));

    assert_eq!(code(&longtail(&args)), 0);
    let first: Vec<Vec<u8>> = ["train.csv", "val.csv", "test.csv", "config.toml"]
        .iter()
        .map(|n| read(dir.path(), n))
        .collect();
    let first_manifest = without_timestamp(&read_text(dir.path(), "manifest.txt"));

    assert_eq!(code(&longtail(&args)), 0);
    for (name, bytes) in ["train.csv", "val.csv", "test.csv", "config.toml"]
        .iter()
        .zip(first.iter())
    {
        assert_eq!(&read(dir.path(), name), bytes, "{name} changed across reruns");
    }
    assert_eq!(
        without_timestamp(&read_text(dir.path(), "manifest.txt")),
        first_manifest
    );
}

#[test]
fn ratio_one_generates_a_balanced_train_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = longtail(&[
        "generate", "--out", out, "--ratio", "1", "--n-max", "40",
        "--val-per-class", "5", "--test-per-class", "5",
    ]);
    assert_eq!(code(&output), 0);
    let manifest = read_text(dir.path(), "manifest.txt");
    assert!(manifest.contains("train-counts=40,40,40"), "{manifest}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let config_path = dir.path().join("experiment.toml");
    std::fs::write(
        &config_path,
        format!("ratio = 9\nn-max = 90\nval-per-class = 5\ntest-per-class = 5\nout-dir = \"{out}\"\n"),
    )
    .unwrap();
    let output = longtail(&[
        "generate", "--config", config_path.to_str().unwrap(), "--ratio", "1",
    ]);
    assert_eq!(code(&output), 0);
    let manifest = read_text(dir.path(), "manifest.txt");
    assert!(manifest.contains("ratio=1"), "{manifest}");
    assert!(manifest.contains("train-counts=90,90,90"), "{manifest}");
}

#[test]
fn two_losses_share_data_hashes_but_not_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut generate = vec!["generate"];
    generate.extend(small_args(out));
    assert_eq!(code(&longtail(&generate)), 0);

    let mut train_ce = vec!["train", "--loss", "ce"];
    train_ce.extend(small_args(out));
    assert_eq!(code(&longtail(&train_ce)), 0);
    let ce_epochs = read(dir.path(), "epochs.csv");
    let ce_manifest = read_text(dir.path(), "train_manifest.txt");

    let mut train_ol = vec!["train", "--loss", "mse-ol", "--alpha", "2"];
    train_ol.extend(small_args(out));
    assert_eq!(code(&longtail(&train_ol)), 0);
    let ol_epochs = read(dir.path(), "epochs.csv");
    let ol_manifest = read_text(dir.path(), "train_manifest.txt");

    assert_ne!(ce_epochs, ol_epochs, "different losses must yield different logs");
    let dataset_lines = |m: &str| {
        m.lines()
            .filter(|l| {
                l.starts_with("hash-train.csv")
                    || l.starts_with("hash-val.csv")
                    || l.starts_with("hash-test.csv")
            })
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert_eq!(dataset_lines(&ce_manifest), dataset_lines(&ol_manifest));
    assert_eq!(dataset_lines(&ce_manifest).len(), 3);
    let model_line = |m: &str| {
        m.lines()
            .find(|l| l.starts_with("hash-model.ckpt"))
            .map(String::from)
    };
    assert_ne!(model_line(&ce_manifest), model_line(&ol_manifest));
}

#[test]
fn evaluate_matches_the_training_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut generate = vec!["generate"];
    generate.extend(small_args(out));
    assert_eq!(code(&longtail(&generate)), 0);
    let mut train = vec!["train"];
    train.extend(small_args(out));
    assert_eq!(code(&longtail(&train)), 0);

    let output = longtail(&["evaluate", "--out", out]);
    assert_eq!(code(&output), 0);
    assert_eq!(read_text(dir.path(), "eval_report.txt"), read_text(dir.path(), "report.txt"));
    assert_eq!(
        read_text(dir.path(), "eval_confusion.csv"),
        read_text(dir.path(), "confusion.csv")
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("accuracy="), "{stdout}");
}

#[test]
fn dump_features_covers_the_split_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut generate = vec!["generate"];
    generate.extend(small_args(out));
    assert_eq!(code(&longtail(&generate)), 0);
    let mut train = vec!["train"];
    train.extend(small_args(out));
    assert_eq!(code(&longtail(&train)), 0);

    let run = longtail(&["dump-features", "--out", out, "--split", "val"]);
    assert_eq!(code(&run), 0);
    let features = read_text(dir.path(), "features_val.csv");
    // Header plus one row per validation sample (3 classes x 10).
    assert_eq!(features.lines().count(), 1 + 30);
    assert!(features.starts_with("f0"), "{features}");

    let rerun = longtail(&["dump-features", "--out", out, "--split", "val"]);
    assert_eq!(code(&rerun), 0);
    assert_eq!(read_text(dir.path(), "features_val.csv"), features);
}

#[test]
fn sweep_with_a_single_seed_reports_zero_stddev() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut generate = vec!["generate"];
    generate.extend(small_args(out));
    assert_eq!(code(&longtail(&generate)), 0);

    let output = longtail(&[
        "sweep-alpha", "--out", out, "--n-max", "60", "--ratio", "6",
        "--val-per-class", "10", "--test-per-class", "10", "--epoch-max", "5",
        "--batch-size", "16", "--hidden", "8", "--alphas", "1,2", "--seeds", "7",
    ]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));

    let csv = read_text(dir.path(), "sweep.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "alpha,metric_mean,metric_std");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2, "{csv}");
    for row in rows {
        assert!(row.ends_with(",0"), "single seed must give stddev 0: {row}");
    }

    let best = read_text(dir.path(), "sweep_best.txt");
    assert!(best.contains("best-alpha="), "{best}");
    assert!(best.contains("seeds=7"), "{best}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("(\u{00b1}0)"), "{stdout}");
}

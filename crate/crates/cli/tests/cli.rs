//! Drive the compiled binary end to end on a tiny corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_blinklight")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(
        &path,
        r#"
out_dir = "out"
seed = 11

[synth]
clip_count = 3
duration_s = 12.0
n_participants = 4
events_min = 1
events_max = 1
event_margin_s = 4.0

[dataset]
stride = 6

[model]
filters = [3, 4, 3]

[train]
batch_size = 64
max_epochs = 2
"#,
    )
    .unwrap();
    path
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("blk-cli-{tag}-{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn full_stage_chain_on_tiny_corpus() {
    let dir = temp_dir("chain");
    tiny_config(&dir);

    for stage in ["synth", "ingest", "blinks", "dataset", "train", "stats", "highlights"] {
        let out = run_in(&dir, &[stage, "--config", "tiny.toml"]);
        assert_ok(&out, stage);
    }

    // artifacts exist
    let out_dir = dir.join("out");
    assert!(out_dir.join("corpus/synth00/clip.json").is_file());
    assert!(out_dir.join("ingest/synth00.joints.bin").is_file());
    assert!(out_dir.join("blinks/synth01.rate.csv").is_file());
    assert!(out_dir.join("dataset/dataset.bin").is_file());
    assert!(out_dir.join("train/folds/synth02/checkpoint.ckpt").is_file());
    assert!(out_dir.join("train/folds/synth02/train_log.csv").is_file());
    assert!(out_dir.join("train/predictions/synth00.pred.csv").is_file());
    assert!(out_dir.join("stats/correlations.csv").is_file());
    assert!(out_dir.join("highlights/summary.csv").is_file());

    // correlations.csv has one row per clip
    let corr = fs::read_to_string(out_dir.join("stats/correlations.csv")).unwrap();
    assert_eq!(corr.lines().count(), 1 + 3, "header + 3 clips:\n{corr}");

    // prediction series starts at frame 89
    let pred = fs::read_to_string(out_dir.join("train/predictions/synth00.pred.csv")).unwrap();
    assert!(pred.starts_with("frame,predicted_rate\n89,"));

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn stages_are_idempotent_and_deterministic() {
    let dir = temp_dir("idem");
    tiny_config(&dir);

    for stage in ["synth", "ingest", "blinks", "dataset"] {
        assert_ok(&run_in(&dir, &[stage, "--config", "tiny.toml"]), stage);
    }
    let path = dir.join("out/dataset/dataset.bin");
    let first = fs::read(&path).unwrap();
    let manifest_first = fs::read(dir.join("out/dataset/manifest.json")).unwrap();

    assert_ok(&run_in(&dir, &["dataset", "--config", "tiny.toml"]), "dataset rerun");
    assert_eq!(first, fs::read(&path).unwrap(), "artifact changed on rerun");
    assert_eq!(
        manifest_first,
        fs::read(dir.join("out/dataset/manifest.json")).unwrap(),
        "manifest changed on rerun"
    );

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_upstream_stage_names_it() {
    let dir = temp_dir("missing");
    tiny_config(&dir);
    assert_ok(&run_in(&dir, &["synth", "--config", "tiny.toml"]), "synth");

    let out = run_in(&dir, &["train", "--config", "tiny.toml"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("dataset"), "error should name the missing stage: {stderr}");

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn tampered_checkpoint_is_a_provenance_failure() {
    let dir = temp_dir("tamper");
    tiny_config(&dir);
    for stage in ["synth", "ingest", "blinks", "dataset", "train"] {
        assert_ok(&run_in(&dir, &[stage, "--config", "tiny.toml"]), stage);
    }

    // corrupt one checkpoint byte
    let ckpt = dir.join("out/train/folds/synth00/checkpoint.ckpt");
    let mut bytes = fs::read(&ckpt).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    fs::write(&ckpt, bytes).unwrap();

    let out = run_in(&dir, &["predict", "--clip", "synth00", "--config", "tiny.toml"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("provenance"),
        "expected a provenance failure: {stderr}"
    );

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn predict_with_explicit_checkpoint() {
    let dir = temp_dir("predict");
    tiny_config(&dir);
    for stage in ["synth", "ingest", "blinks", "dataset", "train"] {
        assert_ok(&run_in(&dir, &[stage, "--config", "tiny.toml"]), stage);
    }
    let out = run_in(
        &dir,
        &[
            "predict",
            "--clip",
            "synth01",
            "--checkpoint",
            "out/train/folds/synth00/checkpoint.ckpt",
            "--config",
            "tiny.toml",
        ],
    );
    assert_ok(&out, "predict with explicit checkpoint");
    assert!(dir.join("out/train/predictions/synth01.pred.csv").is_file());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn dry_run_prints_plan_without_writing() {
    let dir = temp_dir("dry");
    tiny_config(&dir);
    let out = run_in(&dir, &["reproduce", "--config", "tiny.toml", "--dry-run"]);
    assert_ok(&out, "reproduce --dry-run");
    let stdout = String::from_utf8_lossy(&out.stdout);
    for stage in ["synth", "ingest", "blinks", "dataset", "train", "stats", "highlights"] {
        assert!(stdout.contains(stage), "plan missing {stage}: {stdout}");
    }
    assert!(!dir.join("out").exists(), "dry run must not write artifacts");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn usage_error_on_invalid_config() {
    let dir = temp_dir("badcfg");
    fs::write(dir.join("bad.toml"), "[synth]\nclip_count = 0\n").unwrap();
    let out = run_in(&dir, &["synth", "--config", "bad.toml"]);
    assert!(!out.status.success());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn seed_flag_overrides_config() {
    let dir = temp_dir("seed");
    tiny_config(&dir);
    assert_ok(
        &run_in(&dir, &["synth", "--config", "tiny.toml", "--seed", "99", "--out", "out99"]),
        "synth seed 99",
    );
    assert_ok(
        &run_in(&dir, &["synth", "--config", "tiny.toml", "--out", "out11"]),
        "synth seed from config",
    );
    let a = fs::read(dir.join("out99/corpus/synth00/pupil/p00.csv")).unwrap();
    let b = fs::read(dir.join("out11/corpus/synth00/pupil/p00.csv")).unwrap();
    assert_ne!(a, b, "different seeds must change the corpus");
    fs::remove_dir_all(&dir).ok();
}

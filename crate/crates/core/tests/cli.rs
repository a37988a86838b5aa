use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dmon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmon"))
        .current_dir(dir)
        .arg("-q")
        .args(args)
        .output()
        .expect("spawn dmon")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Writes train and test corpora into `dir`.
fn corpora(dir: &Path) -> (PathBuf, PathBuf) {
    let (train, test) = (dir.join("train.jsonl"), dir.join("test.jsonl"));
    ok(&dmon(
        dir,
        &["--seed", "1", "synth", "--docs", "12", "-o", "train.jsonl"],
    ));
    ok(&dmon(
        dir,
        &["--seed", "2", "synth", "--docs", "6", "-o", "test.jsonl"],
    ));
    (train, test)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dmon(dir.path(), &["synth", "-o", "a.jsonl"]));
    ok(&dmon(dir.path(), &["synth", "-o", "b.jsonl"]));
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.jsonl")).unwrap());
    assert_eq!(a.iter().filter(|b| **b == b'\n').count(), 100);

    let out = dmon(dir.path(), &["synth", "--docs", "0", "-o", "c.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("c.jsonl").exists());
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    ok(&dmon(
        d,
        &[
            "--out-dir",
            "run",
            "train",
            "--train",
            "train.jsonl",
            "--steps",
            "25",
        ],
    ));
    let log = fs::read_to_string(d.join("run/train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 25);
    let last: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    assert_eq!(last["step"], 25);
    assert!(d.join("run/checkpoint/manifest.json").exists());
    assert!(d.join("run/checkpoint/params.npz").exists());
    assert!(d.join("run/config.toml").exists());

    ok(&dmon(
        d,
        &[
            "--out-dir",
            "eval",
            "eval",
            "--checkpoint",
            "run/checkpoint",
            "--corpus",
            "test.jsonl",
            "--columns",
            "abstrct",
        ],
    ));
    let m = json(&d.join("eval/metrics.json"));
    for key in ["F1", "S-F1", "A-F1", "U-F1"] {
        let v = m["averages"][key]
            .as_f64()
            .unwrap_or_else(|| panic!("{key} missing: {m}"));
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(m["config_hash"].is_string());
    let csv = fs::read_to_string(d.join("eval/metrics.csv")).unwrap();
    assert!(csv.starts_with("F1"), "{csv}");

    let missing = dmon(
        d,
        &["eval", "--checkpoint", "nowhere", "--corpus", "test.jsonl"],
    );
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    fs::write(
        d.join("run.toml"),
        "[train]\ntotal_steps = 30\ncheckpoint_every = 10\n\n[data]\ntrain = \"train.jsonl\"\n",
    )
    .unwrap();
    ok(&dmon(
        d,
        &["--config", "run.toml", "--out-dir", "a", "train"],
    ));
    assert!(d.join("a/checkpoints/step-000010/manifest.json").exists());
    ok(&dmon(
        d,
        &[
            "--config",
            "run.toml",
            "--out-dir",
            "b",
            "train",
            "--resume",
            "a/checkpoints/step-000010",
        ],
    ));
    let full = fs::read_to_string(d.join("a/train_log.jsonl")).unwrap();
    let resumed = fs::read_to_string(d.join("b/train_log.jsonl")).unwrap();
    let tail: Vec<&str> = full.lines().skip(10).collect();
    assert_eq!(resumed.lines().collect::<Vec<_>>(), tail);
    assert_eq!(json(&d.join("b/checkpoint/manifest.json"))["step"], 30);

    let mismatched = dmon(
        d,
        &[
            "--config",
            "run.toml",
            "train",
            "--steps",
            "40",
            "--resume",
            "a/checkpoints/step-000010",
        ],
    );
    assert_eq!(mismatched.status.code(), Some(2));
}

#[test]
fn variants_train() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    for variant in ["no_HT", "full_tensor_training", "no_T"] {
        ok(&dmon(
            d,
            &[
                "--out-dir",
                variant,
                "train",
                "--train",
                "train.jsonl",
                "--steps",
                "5",
                "--variant",
                variant,
            ],
        ));
        let manifest = json(&d.join(variant).join("checkpoint/manifest.json"));
        assert_eq!(manifest["step"], 5);
    }
    let bad = dmon(d, &["train", "--train", "train.jsonl", "--variant", "no_X"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no_HT"));
}

#[test]
fn ablate_writes_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    ok(&dmon(
        d,
        &[
            "ablate",
            "--train",
            "train.jsonl",
            "--test",
            "test.jsonl",
            "--steps",
            "10",
            "--variants",
            "ord_shuffle,rad_shuffle,ord_and_rad",
        ],
    ));
    let csv = fs::read_to_string(d.join("runs/ablate.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("ord_shuffle,"));
    assert_eq!(
        json(&d.join("runs/ablate.json"))["rows"]
            .as_array()
            .unwrap()
            .len(),
        3
    );

    let empty = dmon(
        d,
        &[
            "ablate",
            "--train",
            "train.jsonl",
            "--test",
            "test.jsonl",
            "--variants",
            "",
        ],
    );
    assert_eq!(empty.status.code(), Some(2));
    let unknown = dmon(
        d,
        &[
            "ablate",
            "--train",
            "train.jsonl",
            "--test",
            "test.jsonl",
            "--variants",
            "full,nope",
        ],
    );
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn sweep_writes_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    ok(&dmon(
        d,
        &[
            "sweep",
            "--train",
            "train.jsonl",
            "--test",
            "test.jsonl",
            "--steps",
            "10",
            "--windows",
            "3,7,13",
        ],
    ));
    let csv = fs::read_to_string(d.join("runs/sweep.csv")).unwrap();
    let windows: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(windows, ["3", "7", "13"]);
    let svg = fs::read_to_string(d.join("runs/sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn config_file_drives_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    fs::write(
        d.join("run.toml"),
        "[train]\ntotal_steps = 7\nwindow_size = 5\n\n[data]\ntrain = \"train.jsonl\"\n",
    )
    .unwrap();
    ok(&dmon(d, &["--config", "run.toml", "train"]));
    assert_eq!(json(&d.join("runs/checkpoint/manifest.json"))["step"], 7);

    fs::write(d.join("bad.toml"), "[train]\nwindow = 5\n").unwrap();
    let out = dmon(d, &["--config", "bad.toml", "train"]);
    assert_eq!(out.status.code(), Some(2));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tinynet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tinynet"))
        .args(args)
        .env_remove("TINYNET_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn generate(dir: &Path) {
    ok(&tinynet(&[
        "generate",
        "--out-dir",
        dir.to_str().unwrap(),
        "--train-per-class",
        "4",
        "--val-per-class",
        "2",
    ]));
}

const SMALL: &[&str] = &["--arch", "100,16,10", "--batchsize", "5", "--n-batches", "8", "--testsize", "20"];

#[test]
fn generate_writes_four_files() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let data = fs::read_to_string(dir.path().join("train_data.csv")).unwrap();
    assert_eq!(data.lines().count(), 40);
    assert!(data.lines().all(|l| l.split(", ").count() == 100));
    let labels = fs::read_to_string(dir.path().join("val_labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 20);
}

#[test]
fn curves_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    generate(&data);
    let run = |out: &str| {
        let out_dir = dir.path().join(out);
        let mut args = vec![
            "run",
            "--mode",
            "curves",
            "--data-dir",
            data.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--seed",
            "1,2",
            "--epochs",
            "3",
        ];
        args.extend_from_slice(SMALL);
        ok(&tinynet(&args));
        out_dir
    };
    let a = run("a");
    let b = run("b");
    let curve = a.join("curve_sparse3_seed2_lr0.05_wdL20.00001.csv");
    let text = fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch,train_cost,val_error"));
    assert_eq!(lines.count(), 3);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names {
        let x = fs::read(a.join(&name)).unwrap();
        let y = fs::read(b.join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs");
    }
}

#[test]
fn config_file_with_cli_override() {
    let dir = tempfile::tempdir().unwrap();
    generate(&dir.path().join("data"));
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        r#"
mode = "compare"
schemes = ["sparse", "sparse3"]
seeds = [1]
outDir = "out"

[train]
lr = 0.01
nItrs = 2
layerSizes = [100, 16, 10]
batchsize = 5
nBatches = 8
testsize = 20

[[datasets]]
name = "tiny"
trainData = "data/train_data.csv"
trainLabels = "data/train_labels.csv"
valData = "data/val_data.csv"
valLabels = "data/val_labels.csv"
"#,
    )
    .unwrap();
    let shown = ok(&tinynet(&["config", "-c", config.to_str().unwrap(), "--lr", "0.2"]));
    assert!(shown.contains("lr = 0.2"), "{shown}");
    assert!(shown.contains("nItrs = 2"));

    let stdout = ok(&tinynet(&["run", "-c", config.to_str().unwrap(), "--lr", "0.2"]));
    assert!(stdout.contains("delta(sparse3 - sparse)"), "{stdout}");
    let out = dir.path().join("out");
    for f in ["compare_summary.txt", "compare_summary.csv", "compare_per_seed.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"specSha256\""));
    assert!(manifest.contains("\"completedRuns\": 2"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_tinynet"))
        .args(["config", "--data-dir", "x"])
        .env("TINYNET_OUT_DIR", &env_out)
        .output()
        .unwrap();
    let text = ok(&out);
    assert!(text.contains(env_out.to_str().unwrap()), "{text}");
}

#[test]
fn width_mismatch_names_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mydata");
    generate(&data);
    let out = tinynet(&[
        "run",
        "--data-dir",
        data.to_str().unwrap(),
        "--out-dir",
        dir.path().join("o").to_str().unwrap(),
        "--arch",
        "64,10",
        "--epochs",
        "1",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"mydata\"") && err.contains("layerSizes[0]"), "{err}");
}

#[test]
fn bad_flags_are_rejected() {
    assert!(!tinynet(&["run", "--init", "orthogonal"]).status.success());
    assert!(!tinynet(&["run", "--mode", "sideways"]).status.success());
    let out = tinynet(&["run"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no dataset"));
}

#[test]
fn shipped_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/tinydigits.toml");
    let shown = ok(&tinynet(&["config", "-c", path.to_str().unwrap()]));
    assert!(shown.contains("layerSizes = [100, 80, 80, 200, 10]"), "{shown}");
    assert!(shown.contains("\"sparse3:0.456463462775:-1.43515478736\""), "{shown}");
}

//! Acceptance: the full CLI pipeline rerun with identical seeds produces
//! byte-identical checkpoint and report files, and the documented phi
//! contract holds on the command line.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn vatts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vatts"))
        .args(args)
        .env("VATTS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vatts(args);
    assert!(
        out.status.success(),
        "vatts {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn run_pipeline(root: &Path) {
    let corpus = root.join("corpus");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    ok(&["synth", "--n", "6", "--seed", "7", "--out", &s(&corpus)]);
    ok(&[
        "extract",
        "--manifest",
        &s(&corpus.join("manifest.jsonl")),
        "--out",
        &s(&root.join("features")),
    ]);
    ok(&[
        "train",
        "--manifest",
        &s(&corpus.join("manifest.jsonl")),
        "--out",
        &s(&root.join("model.ckpt.json")),
        "--seed",
        "3",
        "--epochs",
        "40",
    ]);
    ok(&[
        "infer",
        "--ckpt",
        &s(&root.join("model.ckpt.json")),
        "--manifest",
        &s(&corpus.join("manifest.jsonl")),
        "--out",
        &s(&root.join("pred")),
    ]);
    ok(&[
        "eval",
        "--ref-manifest",
        &s(&corpus.join("manifest.jsonl")),
        "--pred",
        &s(&root.join("pred")),
        "--est-audio",
        &s(&corpus.join("ref")),
        "--out",
        &s(&root.join("report")),
    ]);
}

#[test]
fn criterion_pipeline_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    // Identical flags mean identical paths: run, snapshot, wipe, rerun.
    let root = dir.path().join("run");
    let mut files: Vec<String> = vec![
        "model.ckpt.json".into(),
        "model.ckpt.json.loss.csv".into(),
        "report.csv".into(),
        "report.json".into(),
    ];
    std::fs::create_dir_all(&root).unwrap();
    run_pipeline(&root);
    for entry in std::fs::read_dir(root.join("pred")).unwrap() {
        let name = entry.unwrap().file_name();
        files.push(format!("pred/{}", name.to_string_lossy()));
    }
    let first: Vec<Vec<u8>> = files
        .iter()
        .map(|rel| std::fs::read(root.join(rel)).unwrap())
        .collect();

    std::fs::remove_dir_all(&root).unwrap();
    std::fs::create_dir_all(&root).unwrap();
    run_pipeline(&root);
    for (rel, bytes) in files.iter().zip(&first) {
        let again = std::fs::read(root.join(rel)).unwrap();
        assert_eq!(&again, bytes, "{rel} differs between identical runs");
    }
    assert!(files.len() >= 10);
    println!(
        "PASS: pipeline rerun is byte-identical across {} files ({:.1}s)",
        files.len(),
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn phi_command_prints_the_documented_contract() {
    let stdout = ok(&["phi", "--fps", "30", "--latency-ms", "2.67"]);
    assert!(stdout.contains("phi = 1"), "stdout was: {stdout}");
    println!("PASS: phi --fps 30 --latency-ms 2.67 prints phi = 1");
}

#[test]
fn exit_codes_follow_the_contract() {
    // Unknown flag: usage error.
    let out = vatts(&["phi", "--fps", "30", "--nonsense"]);
    assert_eq!(out.status.code(), Some(1));
    // Missing manifest: data error naming the path.
    let out = vatts(&["train", "--manifest", "/nonexistent/m.jsonl", "--out", "/tmp/x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("/nonexistent/m.jsonl"),
        "stderr names the missing path"
    );
    println!("PASS: exit codes (1 usage, 2 data) and error messages");
}

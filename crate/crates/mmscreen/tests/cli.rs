use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mmscreen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmscreen")).args(args).output().expect("binary runs")
}

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_demo() {
    let out = mmscreen(&["validate", "--dataset", s(&demo())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("feature sets: 12"), "{text}");
    assert!(text.contains("CDR"));
}

#[test]
fn evaluate_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut runs = Vec::new();
    for threads in ["1", "2"] {
        let o = mmscreen(&[
            "evaluate", "--dataset", s(&demo()), "--out", s(&out), "--runs", "1", "--threads", threads,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(
            ["results.csv", "predictions.csv", "evaluate.manifest.json"].map(|f| std::fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(runs[0], runs[1]);
    let results = String::from_utf8(runs[0][0].clone()).unwrap();
    assert!(results.starts_with("task,pipeline,kind,target,learner,metric,mean,ci_half_width"));
}

#[test]
fn missing_dataset_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmscreen(&["validate", "--dataset", s(&dir.path().join("nope"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing participants table"));
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "runs = 1\nbogus = true\n").unwrap();
    let out = mmscreen(&["evaluate", "--config", s(&cfg), "--dataset", s(&demo())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_group_audit_is_undefined() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = mmscreen(&["synth", "--out", s(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = data.join("participants.csv");
    let text = std::fs::read_to_string(&table).unwrap().replace(",M,", ",F,");
    std::fs::write(&table, text).unwrap();

    let out = mmscreen(&[
        "audit", "--dataset", s(&data), "--out", s(&dir.path().join("out")), "--runs", "1", "--task", "CDR",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fairness undefined"), "{err}");
    assert!(err.contains("sex"), "{err}");
}

use std::path::{Path, PathBuf};
use std::process::Command;

fn quick() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/quick.toml")
}

fn reprise(args: &[&str], out: &Path) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_reprise"))
        .args(args)
        .arg("--scenario")
        .arg(quick())
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn demo_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    reprise(&["demo-generate"], d);
    let data = d.join("dataset.jsonl");
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 3);

    reprise(&["train", "--data", data.to_str().unwrap()], d);
    assert!(d.join("bundle.ckpt").exists());
    assert!(std::fs::read_to_string(d.join("autoencoder_loss.csv")).unwrap().starts_with("epoch,loss"));

    let eval = d.join("eval");
    let bundle = d.join("bundle.ckpt");
    let summary = reprise(&["eval", "--method", "ours", "--bundle", bundle.to_str().unwrap()], &eval);
    assert!(summary.contains("ours"));
    let metrics = std::fs::read_to_string(eval.join("metrics.csv")).unwrap();
    // Two seeds, six scheduled trials each, all scored with the one bundle.
    assert_eq!(metrics.lines().count(), 1 + 12);
    assert!(metrics.lines().skip(1).all(|l| l.contains(",ours,can,")));
    assert!(eval.join("trials.jsonl").exists());
    assert!(eval.join("traces").read_dir().unwrap().next().is_some());
}

#[test]
fn experiment_writes_every_artifact_and_honours_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    reprise(&["experiment", "--seed", "3"], &a);
    reprise(&["experiment", "--seed", "3"], &b);
    for f in ["metrics.csv", "trials.jsonl", "summary.csv", "bundle.ckpt", "retrains.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read(a.join("metrics.csv")).unwrap(), std::fs::read(b.join("metrics.csv")).unwrap());
    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(metrics.lines().nth(1).unwrap().starts_with("3,"));

    let only = dir.path().join("only");
    reprise(&["experiment", "--method", "noassist"], &only);
    let metrics = std::fs::read_to_string(only.join("metrics.csv")).unwrap();
    assert!(metrics.lines().skip(1).all(|l| l.contains(",noassist,")));
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_reprise"))
        .args(["experiment", "--scenario", "/nonexistent.toml", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonexistent"));
    let o = Command::new(env!("CARGO_BIN_EXE_reprise")).args(["eval", "--method", "magic", "--scenario", "x"]).output().unwrap();
    assert!(!o.status.success());
}

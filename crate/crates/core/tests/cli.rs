use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

const TINY: &str = r#"
seed = 11
[groove]
energies_uj = [35.0]
speeds_mm_s = [2.5]
repeats = 2
[drill]
enabled = false
[train]
epochs = 2
batch_size = 16
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speckle-monitor"))
        .arg("--config")
        .arg(dir.join("tiny.toml"))
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn fresh() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A synthesized and trained output directory shared by the read-only tests.
fn trained() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = fresh();
        let o = run(dir.path(), &["synth"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let o = run(dir.path(), &["train"]);
        assert!(o.status.success(), "{}", stderr(&o));
        dir
    })
    .path()
}

fn frames_file(dir: &Path, count: usize, width: usize) -> PathBuf {
    let frames: Vec<Vec<f32>> =
        (0..count).map(|k| (0..25 * width).map(|i| ((i + 37 * k) % 101) as f32 / 100.0).collect()).collect();
    let path = dir.join(format!("frames_{count}_{width}.json"));
    let body = serde_json::json!({ "height": 25, "width": width, "frames": frames });
    fs::write(&path, body.to_string()).unwrap();
    path
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let (a, b) = (fresh(), fresh());
    for d in [&a, &b] {
        let o = run(d.path(), &["synth"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let read = |d: &TempDir| fs::read(d.path().join("out/groove.spkl")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert!(!a.path().join("out/drill.spkl").exists());
}

#[test]
fn training_twice_gives_the_same_loss_curve() {
    let dir = fresh();
    assert!(run(dir.path(), &["synth"]).status.success());
    let curve = dir.path().join("out/groove_loss.csv");
    assert!(run(dir.path(), &["train"]).status.success());
    let first = fs::read(&curve).unwrap();
    assert!(run(dir.path(), &["train"]).status.success());
    assert_eq!(first, fs::read(&curve).unwrap());
}

#[test]
fn training_without_a_dataset_is_an_error() {
    let dir = fresh();
    let o = run(dir.path(), &["train"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("groove.spkl"), "{}", stderr(&o));
}

#[test]
fn unreadable_config_is_an_error() {
    let dir = fresh();
    fs::write(dir.path().join("tiny.toml"), "[train]\nepochs = \"many\"\n").unwrap();
    assert_eq!(run(dir.path(), &["synth"]).status.code(), Some(1));
}

#[test]
fn threshold_failure_exits_with_two() {
    let dir = trained();
    let strict = dir.join("strict.toml");
    fs::write(&strict, "[groove]\nmin_accuracy = 1.01\n").unwrap();
    let o = run(dir, &["--threshold-file", strict.to_str().unwrap(), "eval"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL accuracy"), "{}", stdout(&o));

    let loose = dir.join("loose.toml");
    fs::write(&loose, "[groove]\nmin_accuracy = 0.0\n[bench]\nmax_p95_ms = 1e9\n").unwrap();
    let o = run(dir, &["--threshold-file", loose.to_str().unwrap(), "eval"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(dir, &["--threshold-file", loose.to_str().unwrap(), "bench", "--iterations", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn predict_emits_one_record_per_window() {
    let dir = trained();
    for (count, windows) in [(3usize, 1usize), (5, 3)] {
        let frames = frames_file(dir, count, 255);
        let o = run(dir, &["predict", "--frames", frames.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let parsed: toml::Value = toml::from_str(&stdout(&o)).unwrap();
        let preds = parsed["predictions"].as_array().unwrap();
        assert_eq!(preds.len(), windows);
        let probs: f64 = preds[0]["class_probs"].as_array().unwrap().iter().map(|p| p.as_float().unwrap()).sum();
        assert!((probs - 1.0).abs() < 1e-5);
        assert_eq!(preds[windows - 1]["last_frame"].as_integer(), Some(count as i64));
    }
}

#[test]
fn predict_rejects_bad_frames() {
    let dir = trained();
    for frames in [frames_file(dir, 2, 255), frames_file(dir, 3, 254)] {
        let o = run(dir, &["predict", "--frames", frames.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    }
}

#[test]
fn resume_extends_training() {
    let dir = fresh();
    assert!(run(dir.path(), &["synth"]).status.success());
    assert!(run(dir.path(), &["train"]).status.success());
    // Resuming continues up to the configured epoch count.
    fs::write(dir.path().join("tiny.toml"), TINY.replace("epochs = 2", "epochs = 4")).unwrap();
    let o = run(dir.path(), &["train", "--resume"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("trained 4 epochs"), "{}", stdout(&o));
}

#[test]
fn checkpoint_and_dataset_must_agree() {
    let dir = trained();
    let other = tempfile::tempdir().unwrap();
    let cfg = "[groove]\nenabled = false\n[drill]\nruns = 2\n";
    fs::write(other.path().join("tiny.toml"), cfg).unwrap();
    assert!(run(other.path(), &["synth"]).status.success());
    let drill = other.path().join("out/drill.spkl");
    let o = run(dir, &["eval", "--dataset", drill.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("K=3") && stderr(&o).contains("K=1"), "{}", stderr(&o));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fvqc_cli::run::{sha256_file, RunManifest};

fn fvqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvqc")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn quickstart() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ghz-quickstart.toml")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"
[target]
kind = "ghz"

[layout]
pattern = "SASAS"

[circuit]
u1-depth = 2

[loss]
objective = "fidelity"

[schedule]
lr = { kind = "constant", lr = 0.05 }
freq = { points = [[0, 2.0]] }

[train]
epochs = 40
seeds = [3]
snapshot-interval = 20

[teacher-student]
n-qubits = 4
depths = [1, 2]
entropies = [0.0]
restarts = 1
"#;

fn final_infidelity(metrics: &Path) -> f64 {
    let mut rd = csv::Reader::from_path(metrics).unwrap();
    let col = rd.headers().unwrap().iter().position(|h| h == "infidelity").unwrap();
    let last = rd.records().last().unwrap().unwrap();
    last[col].parse().unwrap()
}

#[test]
fn quickstart_converges_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quickstart();
    let mut sums = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = fvqc(&["train", "--config", cfg.to_str().unwrap(), "--seed", "0", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let dir = out.join("seed-0");
        let metrics = dir.join("metrics.csv");
        assert!(final_infidelity(&metrics) < 1e-3);
        let manifest = RunManifest::read(&dir).unwrap();
        manifest.verify(&dir).unwrap();
        assert_eq!(manifest.seed, 0);
        assert!(manifest.files.iter().any(|f| f.path == "policy-0.csv"));
        sums.push((sha256_file(&metrics).unwrap(), manifest.config_hash));
    }
    assert_eq!(sums[0], sums[1]);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let no_target = write_config(tmp.path(), "a.toml", &SMALL.replace("[target]\nkind = \"ghz\"\n", ""));
    let o = fvqc(&["train", "--config", no_target.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("target"));

    let garbage = write_config(tmp.path(), "b.toml", "this is not toml = = =");
    assert_eq!(code(&fvqc(&["train", "--config", garbage.to_str().unwrap()])), 2);
    assert_eq!(code(&fvqc(&["train", "--config", "/nonexistent/config.toml"])), 2);
    assert_eq!(code(&fvqc(&["train"])), 2);
    assert!(!out.exists());
}

#[test]
fn seeds_epochs_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let out = tmp.path().join("runs");
    let o = fvqc(&[
        "train", "--config", cfg.to_str().unwrap(), "--seed", "1", "--seed", "2", "--epochs", "30",
        "--out", out.to_str().unwrap(), "--threads", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for seed in [1, 2] {
        let dir = out.join(format!("seed-{seed}"));
        let rows = std::fs::read_to_string(dir.join("metrics.csv")).unwrap().lines().count();
        assert_eq!(rows, 31);
        assert!(dir.join("snapshots/epoch-000000/theta1.csv").exists());
        assert!(dir.join("snapshots/epoch-000020/policy-0.csv").exists());
        let snap = std::fs::read_to_string(dir.join("config.toml")).unwrap();
        assert!(snap.contains(&format!("seeds = [{seed}]")));
    }
    // finished runs are never overwritten
    let again = fvqc(&["train", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&again), 2);
}

#[test]
fn analyze_writes_every_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "d.toml", SMALL);
    let out = tmp.path().join("runs");
    assert_eq!(code(&fvqc(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let run = out.join("seed-3");
    let before = sha256_file(&run.join("metrics.csv")).unwrap();
    let o = fvqc(&["analyze", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = run.join("analysis");
    for f in ["mi-post-u1.csv", "mi-profile.csv", "entropy.csv", "correctability-0.csv", "correctability-1.csv"] {
        assert!(a.join(f).exists(), "{f}");
    }
    // one report per ancilla index, MI for three stages
    let n_mi = std::fs::read_dir(&a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("mi-post"))
        .count();
    assert_eq!(n_mi, 3);
    // Ī(d) rows for d = 1..n−1 in each stage: 5 qubits, then 3 + 3 system qubits
    let profile = std::fs::read_to_string(a.join("mi-profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1 + 4 + 2 + 2);
    let u1: Vec<_> = profile.lines().filter(|l| l.ends_with("post-u1")).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(u1, ["1", "2", "3", "4"]);
    assert_eq!(sha256_file(&run.join("metrics.csv")).unwrap(), before);

    let only = tmp.path().join("only");
    let o = fvqc(&["analyze", run.to_str().unwrap(), "--analyses", "entropy", "--out", only.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_dir(&only).unwrap().count(), 1);
}

#[test]
fn analyze_rejects_missing_or_tampered_runs() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&fvqc(&["analyze", tmp.path().join("nope").to_str().unwrap()])), 2);
    let cfg = write_config(tmp.path(), "e.toml", &SMALL.replace("epochs = 40", "epochs = 5"));
    let out = tmp.path().join("runs");
    assert_eq!(code(&fvqc(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let run = out.join("seed-3");
    std::fs::remove_file(run.join("theta1.csv")).unwrap();
    assert_eq!(code(&fvqc(&["analyze", run.to_str().unwrap()])), 2);
}

#[test]
fn validate_passes_on_stock_build() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fvqc(&["validate", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for name in ["aklt_zero_energy", "manifold_gram", "gradient_fd", "entropy_identities", "regularization_window"] {
        assert!(stdout.contains(name), "{name}");
    }
    assert!(!stdout.contains("FAIL"));
    assert!(tmp.path().join("validation.csv").exists());
}

#[test]
fn gradcheck_and_teacher_student() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "f.toml", SMALL);
    let o = fvqc(&["gradcheck", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(tmp.path().join("gradcheck.csv").exists());

    let sampled = write_config(tmp.path(), "g.toml", &SMALL.replace("objective = \"fidelity\"", "objective = \"fidelity\"\nbatch = 16"));
    assert_eq!(code(&fvqc(&["gradcheck", "--config", sampled.to_str().unwrap()])), 2);

    let out = tmp.path().join("ts");
    let o = fvqc(&["teacher-student", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("expressivity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn shipped_configs_parse_and_build() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = fvqc_cli::config::ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        // the 24-qubit problem is too large to build in a test
        if cfg.layout().unwrap().n_qubits() <= 16 {
            cfg.problem().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
        n += 1;
    }
    assert_eq!(n, 5);
}

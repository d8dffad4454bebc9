//! Run directories: one per (config, seed), never modified after training
//! except for the `analysis/` subdirectory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use feedback_vqc::feedback::Policy;
use feedback_vqc::optim::{train, RunRecord, StopReason};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";
pub const METRICS: &str = "metrics.csv";
pub const THETA1: &str = "theta1.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
    pub stop: String,
    pub epochs_run: usize,
    pub final_infidelity: Option<f64>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(dir.join(MANIFEST))
            .map_err(|e| CliError::Missing(format!("{}: {e}", dir.join(MANIFEST).display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Missing(format!("bad manifest: {e}")))
    }

    /// Every listed file exists with the recorded checksum.
    pub fn verify(&self, dir: &Path) -> Result<(), CliError> {
        for f in &self.files {
            let entry = file_entry(dir, Path::new(&f.path))
                .map_err(|e| CliError::Missing(format!("{}: {e}", f.path)))?;
            if entry != *f {
                return Err(CliError::Missing(format!("{} does not match the manifest", f.path)));
            }
        }
        Ok(())
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn file_entry(dir: &Path, rel: &Path) -> std::io::Result<FileEntry> {
    let full = dir.join(rel);
    Ok(FileEntry {
        path: rel.to_string_lossy().replace('\\', "/"),
        sha256: sha256_file(&full)?,
        bytes: fs::metadata(&full)?.len(),
    })
}

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed-{seed}"))
}

pub fn write_theta(path: &Path, theta: &[f64]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "index,value")?;
    for (k, x) in theta.iter().enumerate() {
        writeln!(w, "{k},{x:e}")?;
    }
    w.flush()
}

pub fn read_theta(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut rd = csv::Reader::from_path(path)
        .map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))?;
    rd.records()
        .map(|r| {
            let r = r.map_err(|e| CliError::Missing(e.to_string()))?;
            r.get(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Missing(format!("bad row in {}", path.display())))
        })
        .collect()
}

fn policy_name(round: usize, p: &Policy) -> String {
    format!("policy-{round}.{}", p.extension())
}

fn write_params(dir: &Path, theta1: &[f64], policies: &[Policy]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    write_theta(&dir.join(THETA1), theta1)?;
    let mut files = vec![PathBuf::from(THETA1)];
    for (r, p) in policies.iter().enumerate() {
        let name = policy_name(r, p);
        p.save(&dir.join(&name))?;
        files.push(PathBuf::from(name));
    }
    Ok(files)
}

/// Trains `config` for one seed into `root/seed-<seed>`.
pub fn train_seed(config: &ExperimentConfig, seed: u64, root: &Path) -> Result<(PathBuf, RunRecord), CliError> {
    let dir = seed_dir(root, seed);
    if dir.join(MANIFEST).exists() {
        return Err(CliError::Config(format!(
            "{} already holds a finished run; choose another --out",
            dir.display()
        )));
    }
    let started = now();
    let cfg = config.for_seed(seed);
    let problem = cfg.problem()?;
    let (theta1, policies) = cfg.initial_point(&problem, seed)?;
    let record = train(&problem, theta1, policies, &cfg.train_config(), seed)?;

    fs::create_dir_all(&dir)?;
    let mut files = vec![PathBuf::from(CONFIG), PathBuf::from(METRICS)];
    fs::write(dir.join(CONFIG), cfg.to_toml())?;
    record.write_metrics_csv(std::io::BufWriter::new(fs::File::create(dir.join(METRICS))?))?;
    files.extend(write_params(&dir, &record.theta1, &record.policies)?);
    for s in &record.snapshots {
        let rel = PathBuf::from("snapshots").join(format!("epoch-{:06}", s.epoch));
        let pols: Vec<Policy> = record
            .policies
            .iter()
            .zip(&s.policies)
            .map(|(p, w)| {
                let mut q = p.clone();
                q.weights_mut().copy_from_slice(w);
                q
            })
            .collect();
        for f in write_params(&dir.join(&rel), &s.theta1, &pols)? {
            files.push(rel.join(f));
        }
    }

    let manifest = RunManifest {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        started,
        finished: now(),
        stop: match &record.stop {
            StopReason::Completed => "completed".into(),
            StopReason::Converged => "converged".into(),
            StopReason::NumericAbort(m) => format!("numeric-abort: {m}"),
        },
        epochs_run: record.metrics.len(),
        final_infidelity: record.final_metrics().map(|m| m.infidelity),
        files: files
            .iter()
            .map(|f| file_entry(&dir, f))
            .collect::<std::io::Result<_>>()?,
    };
    fs::write(
        dir.join(MANIFEST),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok((dir, record))
}

/// A finished run loaded back from disk.
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub manifest: RunManifest,
    pub theta1: Vec<f64>,
    pub policies: Vec<Policy>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, CliError> {
    let manifest = RunManifest::read(dir)?;
    manifest.verify(dir)?;
    let config = ExperimentConfig::from_path(&dir.join(CONFIG))?;
    let problem = config.problem()?;
    let kind = config.policy_kind(&problem)?;
    let theta1 = read_theta(&dir.join(THETA1))?;
    let ext = if matches!(kind, feedback_vqc::feedback::PolicyKind::Tabular) { "csv" } else { "bin" };
    let policies = (0..problem.spec.rounds())
        .map(|r| {
            let path = dir.join(format!("policy-{r}.{ext}"));
            Policy::load(&kind, &path).map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        config,
        manifest,
        theta1,
        policies,
    })
}

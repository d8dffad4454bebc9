use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use feedback_vqc::analysis::{
    correctability_check, protocol_mi_stages, teacher_student, write_correctability_csv,
    write_expressivity_csv, write_mi_csv, write_profile_csv, LocalOptConfig, MiMatrix,
};
use feedback_vqc::gradients::fd_check;
use feedback_vqc::optim::{RunRecord, StopReason};
use feedback_vqc::protocol::EvalMode;
use feedback_vqc::validation::{run_validation, ValidationOptions, ValidationReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::run::{load_run, train_seed, LoadedRun, METRICS};
use crate::CliError;

/// Largest relative finite-difference error accepted by `gradcheck`.
pub const GRADCHECK_TOL: f64 = 1e-5;
const GRADCHECK_EPS: f64 = 1e-4;
/// Coordinates checked by `gradcheck`; larger problems are strided.
const GRADCHECK_COORDS: usize = 200;

/// Trains every seed. A numeric abort still leaves its run directory and
/// is reported once all seeds have finished.
pub fn train(config: &ExperimentConfig, out: &Path) -> Result<Vec<(PathBuf, RunRecord)>, CliError> {
    let mut runs = Vec::new();
    let mut aborted = Vec::new();
    for &seed in &config.train.seeds {
        let (dir, rec) = train_seed(config, seed, out)?;
        if let StopReason::NumericAbort(m) = &rec.stop {
            aborted.push(format!("seed {seed}: {m}"));
        }
        runs.push((dir, rec));
    }
    if aborted.is_empty() {
        Ok(runs)
    } else {
        Err(CliError::Numeric(aborted.join("; ")))
    }
}

pub fn validate(seed: u64, out: Option<&Path>) -> Result<ValidationReport, CliError> {
    let report = run_validation(&ValidationOptions {
        seed,
        ..ValidationOptions::default()
    })?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        report.write_csv(BufWriter::new(fs::File::create(dir.join("validation.csv"))?))?;
        for (name, fd) in &report.gradients {
            fd.write_csv(BufWriter::new(fs::File::create(dir.join(format!("fd-{name}.csv")))?))?;
        }
    }
    Ok(report)
}

/// Finite-difference check of the configured problem at a random point.
/// Returns the worst relative error.
pub fn gradcheck(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<f64, CliError> {
    let problem = config.problem()?;
    if problem.loss.mode != EvalMode::Exact {
        return Err(CliError::Config("gradcheck needs exact evaluation (remove loss.batch)".into()));
    }
    let (theta1, mut policies) = config.initial_point(&problem, seed)?;
    // fresh policies sit at identity feedback; move away from it
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    for p in &mut policies {
        for w in p.weights_mut() {
            *w += rng.random_range(-0.3..0.3);
        }
    }
    let n = theta1.len() + policies.iter().map(|p| p.n_weights()).sum::<usize>();
    let stride = n.div_ceil(GRADCHECK_COORDS).max(1);
    let coords: Vec<usize> = (0..n).step_by(stride).collect();
    let report = fd_check(&problem, &theta1, &policies, GRADCHECK_EPS, Some(&coords))?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        report.write_csv(BufWriter::new(fs::File::create(dir.join("gradcheck.csv"))?))?;
    }
    Ok(report.max_rel_err())
}

pub fn teacher_student_scan(config: &ExperimentConfig, seed: u64, out: &Path) -> Result<PathBuf, CliError> {
    let ts = &config.teacher_student;
    let cfg = LocalOptConfig::default();
    let mut points = Vec::new();
    for &s0 in &ts.entropies {
        for &d in &ts.depths {
            points.push(teacher_student(ts.n_qubits, d, d, s0, ts.restarts, seed, &cfg)?);
        }
    }
    fs::create_dir_all(out)?;
    let path = out.join("expressivity.csv");
    write_expressivity_csv(BufWriter::new(fs::File::create(&path)?), &points)?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Analysis {
    /// MI matrices per stage and outcome.
    Mi,
    /// Averaged MI against distance for every stage.
    Profile,
    /// One correctability report per ancilla index.
    Correctability,
    /// Shannon and entanglement entropy along training.
    Entropy,
}

impl Analysis {
    pub const ALL: [Analysis; 4] = [Analysis::Mi, Analysis::Profile, Analysis::Correctability, Analysis::Entropy];
}

/// Writes the requested analyses of the run in `run_dir` to `out`
/// (default `run_dir/analysis`). Returns the files written.
pub fn analyze(run_dir: &Path, which: &[Analysis], seed: u64, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let run = load_run(run_dir)?;
    let out = out.map_or_else(|| run_dir.join("analysis"), Path::to_path_buf);
    fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    if which.contains(&Analysis::Mi) || which.contains(&Analysis::Profile) {
        let stages = mi_stages(&run)?;
        if which.contains(&Analysis::Mi) {
            for mi in &stages {
                let path = out.join(format!("mi-{}.csv", mi.stage.label()));
                write_mi_csv(BufWriter::new(fs::File::create(&path)?), mi)?;
                written.push(path);
            }
        }
        if which.contains(&Analysis::Profile) {
            let path = out.join("mi-profile.csv");
            write_profile_csv(BufWriter::new(fs::File::create(&path)?), &stages)?;
            written.push(path);
        }
    }
    if which.contains(&Analysis::Correctability) {
        let problem = run.config.problem()?;
        let a = &run.config.analysis;
        let indices: Vec<usize> = if a.correctability_indices.is_empty() {
            (0..problem.spec.layout().n_ancilla()).collect()
        } else {
            a.correctability_indices.clone()
        };
        let cfg = LocalOptConfig::default();
        for index in indices {
            let report = correctability_check(
                &problem,
                &run.theta1,
                &run.policies[0],
                index,
                a.correctability_penalty,
                seed,
                &cfg,
            )?;
            let path = out.join(format!("correctability-{index}.csv"));
            write_correctability_csv(BufWriter::new(fs::File::create(&path)?), &report)?;
            written.push(path);
        }
    }
    if which.contains(&Analysis::Entropy) {
        let path = out.join("entropy.csv");
        write_entropy(&run.dir.join(METRICS), &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Post-`U₁` once, then the post-measurement and post-feedback stages of
/// each configured outcome (the most probable one by default).
fn mi_stages(run: &LoadedRun) -> Result<Vec<MiMatrix>, CliError> {
    let problem = run.config.problem()?;
    let outcomes = if run.config.analysis.outcomes.is_empty() {
        let table = problem.spec.prepare(&run.theta1)?.outcome_distribution();
        let best = (0..table.len())
            .max_by(|&a, &b| table.get(a).total_cmp(&table.get(b)))
            .unwrap_or(0);
        vec![best]
    } else {
        run.config.analysis.outcomes.clone()
    };
    let mut all = Vec::new();
    for (k, &m) in outcomes.iter().enumerate() {
        let [u1, measured, fed] = protocol_mi_stages(&problem.spec, &run.theta1, &run.policies[0], m)?;
        if k == 0 {
            all.push(u1);
        }
        all.push(measured);
        all.push(fed);
    }
    Ok(all)
}

fn write_entropy(metrics: &Path, path: &Path) -> Result<(), CliError> {
    let mut rd = csv::Reader::from_path(metrics).map_err(|e| CliError::Missing(e.to_string()))?;
    let headers = rd.headers().map_err(|e| CliError::Missing(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Missing(format!("metrics.csv has no {name} column")))
    };
    let (e, h, s) = (col("epoch")?, col("H")?, col("S")?);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Io(e.into()))?;
    let io = |e: csv::Error| CliError::Io(e.into());
    w.write_record(["epoch", "H", "S"]).map_err(io)?;
    for rec in rd.records() {
        let rec = rec.map_err(|e| CliError::Missing(e.to_string()))?;
        w.write_record([&rec[e], &rec[h], &rec[s]]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

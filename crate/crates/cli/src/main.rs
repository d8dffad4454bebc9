use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fvqc_cli::commands::{self, Analysis, GRADCHECK_TOL};
use fvqc_cli::{exit, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fvqc", version, about = "Feedback-augmented variational circuit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed; repeat for several. Overrides `train.seeds`.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Overrides `train.epochs`.
    #[arg(long)]
    epochs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed into its own run directory.
    Train(Common),
    /// Run the oracle suite.
    Validate(Common),
    /// Write analysis CSVs for a finished run.
    Analyze {
        /// Run directory (one seed).
        run: PathBuf,
        /// Analyses to run (default: all).
        #[arg(long, value_enum, value_delimiter = ',')]
        analyses: Vec<Analysis>,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference check of the configured problem's gradient.
    Gradcheck(Common),
    /// Teacher-student landscape scan.
    TeacherStudent(Common),
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| CliError::Config("--config is required".into()))?;
        let mut cfg = ExperimentConfig::from_path(path)?;
        if !self.seeds.is_empty() {
            cfg.train.seeds = self.seeds.clone();
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(o) = &self.out {
            cfg.train.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn seed(&self) -> u64 {
        self.seeds.first().copied().unwrap_or(0)
    }
}

fn set_threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => {
            set_threads(c.threads)?;
            let cfg = c.load()?;
            for (dir, rec) in commands::train(&cfg, &cfg.train.out)? {
                let last = rec.final_metrics();
                println!(
                    "{}: {:?} after {} epochs, infidelity {:.3e}",
                    dir.display(),
                    rec.stop,
                    rec.metrics.len(),
                    last.map_or(f64::NAN, |m| m.infidelity)
                );
            }
        }
        Command::Validate(c) => {
            set_threads(c.threads)?;
            let seed = match &c.config {
                Some(_) => c.load()?.train.seeds[0],
                None => c.seed(),
            };
            let report = commands::validate(seed, c.out.as_deref())?;
            for check in &report.checks {
                let tag = if check.passed { "ok  " } else { "FAIL" };
                println!("{tag} {:<24} {:.3e} (tol {:.1e})  {}", check.name, check.value, check.tolerance, check.detail);
            }
            if !report.passed() {
                return Err(CliError::Check("validation".into()));
            }
        }
        Command::Analyze { run, analyses, common } => {
            set_threads(common.threads)?;
            let which = if analyses.is_empty() { Analysis::ALL.to_vec() } else { analyses };
            for f in commands::analyze(&run, &which, common.seed(), common.out.as_deref())? {
                println!("{}", f.display());
            }
        }
        Command::Gradcheck(c) => {
            set_threads(c.threads)?;
            let cfg = c.load()?;
            let worst = commands::gradcheck(&cfg, c.seed(), c.out.as_deref())?;
            println!("worst relative error {worst:.3e} (tol {GRADCHECK_TOL:.0e})");
            if !(worst < GRADCHECK_TOL) {
                return Err(CliError::Check(format!("gradient error {worst:.3e}")));
            }
        }
        Command::TeacherStudent(c) => {
            set_threads(c.threads)?;
            let cfg = c.load()?;
            let out = c.out.clone().unwrap_or_else(|| cfg.train.out.clone());
            let path = commands::teacher_student_scan(&cfg, c.seed(), Path::new(&out))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("fvqc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

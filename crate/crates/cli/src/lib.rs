//! Config-driven experiment runner: training, validation and analysis
//! commands that write reproducible run directories.

pub mod commands;
pub mod config;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const CHECK: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("missing or damaged run artifact: {0}")]
    Missing(String),
    #[error("numeric abort: {0}")]
    Numeric(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(feedback_vqc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Missing(_) => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
            CliError::Check(_) => exit::CHECK,
            CliError::Io(_) | CliError::Core(_) => exit::FAILURE,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<feedback_vqc::Error> for CliError {
    fn from(e: feedback_vqc::Error) -> Self {
        match e {
            feedback_vqc::Error::NumericAbort(m) => CliError::Numeric(m),
            other => CliError::Core(other),
        }
    }
}

//! Command-line front end: configuration, experiment orchestration, CSV
//! output and the invariant suite behind `sim verify`.

use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{cmd_compare, cmd_print_summary, cmd_run, detect_discontinuities};
pub use config::{load_config, parse_config, ExperimentConfig, NoiseKind, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("run failed: {0}")]
    Run(#[from] levy_sir::SimError),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            _ => 1,
        }
    }
}

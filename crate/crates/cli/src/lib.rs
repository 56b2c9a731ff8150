//! Scenario runner for the magnetic Hunter–Saxton lab.
//!
//! A scenario is one TOML file (see [`config::ScenarioConfig`]); each
//! subcommand reads it and writes its artifacts into `output_dir`.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 configuration or I/O
//! error, 3 degenerate frequencies.

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;

use thiserror::Error;

pub use commands::{Scenario, Written};
pub use config::ScenarioConfig;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "M2HS_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] m2hs_core::Error),
    #[error("{failed} invariant check(s) failed: {names}")]
    Invariant { failed: usize, names: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(m2hs_core::Error::DegenerateFrequencies { .. }) => 3,
            CliError::Core(_) | CliError::Invariant { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Blowup,
    Validate,
}

/// Loads the config at `path` and runs one subcommand.
pub fn run(command: Command, path: &Path) -> Result<Written, CliError> {
    let cfg = ScenarioConfig::load(path)?;
    let scenario = Scenario::new(cfg)?;
    match command {
        Command::Simulate => commands::simulate(&scenario),
        Command::Blowup => commands::blowup(&scenario),
        Command::Validate => commands::validate(&scenario),
    }
}

/// Worker count from [`THREADS_ENV`]; `None` when unset.
pub fn thread_count(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

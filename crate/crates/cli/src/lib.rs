//! Config-driven experiment runner: forward solves, derivative checks,
//! simplicity search, trace recovery and end-to-end comparisons, with
//! deterministic JSON/CSV outputs and a run manifest.

pub mod config;
pub mod scenarios;

use std::fmt;

pub use config::{ExperimentConfig, Scenario};
pub use scenarios::{run, RunManifest};

#[derive(Debug)]
pub enum CliError {
    /// invalid configuration → exit code 2
    Config(String),
    /// scenario failure → exit code 1
    Scenario(robinlab_core::CoreError),
    Io(String),
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError::Config(message)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Scenario(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Scenario(e) => write!(f, "scenario failure: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<robinlab_core::CoreError> for CliError {
    fn from(e: robinlab_core::CoreError) -> Self {
        match e {
            robinlab_core::CoreError::Config(m) => CliError::Config(m),
            other => CliError::Scenario(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

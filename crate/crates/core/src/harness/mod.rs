//! Experiment orchestration: configuration, seeded replications,
//! aggregation, result files and the command line.

pub mod aggregate;
pub mod cli;
pub mod config;
pub mod output;
pub mod runner;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::diagnostics::DiagnosticsError;
use crate::environment::EnvironmentError;
use crate::policies::PolicyError;

pub use aggregate::{aggregate, aggregate_every, mean_stderr, AggregateSeries, MetricSeries};
pub use config::{ExperimentConfig, ExperimentSettings, PolicyConfig};
pub use output::{emit_outputs, parse_rounds_csv, rounds_csv};
pub use runner::{run_experiment, run_replication, RoundRecord, METRICS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config {path}: {message}", path = .path.display())]
    Config { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}", path = .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("replications differ in length: expected {expected} rounds, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

impl HarnessError {
    /// Whether the error comes from the configuration rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, HarnessError::Config { .. } | HarnessError::InvalidConfig(_))
    }
}

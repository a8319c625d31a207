//! Experiment harness for the `twostage` library: configuration, the
//! model-building recipes, randomization-test driver and report emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod randomization;
pub mod report;

pub use config::{ExperimentConfig, Recipe};
pub use error::{CliError, CliResult, ExitStatus};
pub use experiment::{run_experiment, Partition, RunOutcome, RunReport};

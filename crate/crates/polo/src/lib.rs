//! Experiment harness for `polo-core`: JSON configs and world files, run
//! drivers for the exploration, pendulum, N-step and bound-checking suites,
//! and CSV/JSON output.

pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod experiments;
pub mod logs;

pub use config::{Command, ExperimentConfig};
pub use error::CliError;
pub use experiments::run_experiment;

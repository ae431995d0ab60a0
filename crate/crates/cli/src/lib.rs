//! Experiment orchestration for the polytope laboratory: configuration
//! files, result rows, and the drivers behind each subcommand.

pub mod app;
pub mod config;
pub mod experiments;
pub mod output;

pub use config::ExperimentConfig;
pub use experiments::{run, Outcome, Status};
pub use output::{ResultRow, Value};

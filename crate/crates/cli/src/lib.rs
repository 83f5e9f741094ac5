//! Experiment orchestration for the `mdl` command: JSON configuration, trial
//! execution on a worker pool, CSV and JSON report output, and summaries.

pub mod config;
pub mod error;
pub mod harness;
pub mod summarize;

pub use config::{ExperimentConfig, GeneratorSpec, InstanceSpec, OutputSpec, SeedSpec};
pub use error::{CliError, CliResult};
pub use harness::{run_experiment, sweep, CsvRow, SweepOutcome, CSV_HEADER};

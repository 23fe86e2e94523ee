//! Configuration, seed sweeps, evaluation, CSV output and the CLI.

pub mod cli;
pub mod config;
pub mod eval;
pub mod experiment;

pub use config::{parse_config, parse_config_with_overrides, ConfigError, RunConfig};
pub use eval::{evaluate_policy, EvalRecord};
pub use experiment::{run_experiment, run_seed, run_sweep, summarize, SeedOutcome, SummaryRow};

//! Benchmark front end: JSON configurations in, CSV traces and plain-text
//! reports out.

pub mod config;
pub mod run;

pub use config::{load_config, parse_config, to_json, BuiltRun, ConfigError, RunConfig};
pub use run::{compare, run, solve, trace_csv, Certify, CliError, CompareOutcome, RunOptions, RunOutcome};

//! Experiment configuration, suites and report emission behind the command line.

pub mod commands;
pub mod config;
pub mod report;
pub mod suites;

pub use commands::*;
pub use config::{ExperimentConfig, Tolerances, OUTPUT_DIR_ENV};
pub use report::{Check, RunReport};
pub use suites::*;

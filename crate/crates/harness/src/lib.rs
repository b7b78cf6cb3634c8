//! Experiment harness for the projective Landweber-Kaczmarz solvers in
//! `plwk-core`: noise injection, parallel runs over methods and noise
//! levels, CSV and JSON output, and the `plwk` command line.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;
pub mod noise;

pub use error::{HarnessError, Result};
pub use experiment::{
    compare_methods, run_experiment, sweep_noise, ComparisonTable, ExperimentOutcome,
    ExperimentSpec, RunOutcome, SweepRow, CSV_HEADER,
};
pub use noise::{add_noise, noise_rng};

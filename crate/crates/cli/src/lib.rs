//! Experiment driver: configuration, the individual studies and their
//! CSV / gnuplot output.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{run, GateFailure};
pub use report::Report;

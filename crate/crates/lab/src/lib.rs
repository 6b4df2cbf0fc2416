//! Monte Carlo harness for the minimum-norm interpolant.
//!
//! [`experiment::run_experiment`] drives seeded trials over one or more model
//! points; [`analysis`] builds sweeps and heavy-tail comparisons on top of
//! it and [`output`] persists the results. The `benign` binary exposes all of
//! it through JSON config files.

pub mod analysis;
pub mod config;
mod error;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};

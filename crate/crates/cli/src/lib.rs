//! Experiment runner for the spectral multiplicity laboratory: configuration,
//! seeded ensembles, task dispatch and flat-file reports.

pub mod config;
pub mod error;
pub mod record;
pub mod run;
mod tasks;
pub mod tau;

pub use config::ExperimentConfig;
pub use error::RunError;
pub use record::{report, write_outputs, RunRecord, Summary};
pub use run::{run, RunOptions};

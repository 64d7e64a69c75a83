//! Experiment runner for the `olla-core` samplers: strict JSON
//! configurations, parallel chains, CSV/JSON reports.

pub mod config;
pub mod report;
pub mod runner;

pub use config::RunConfig;
pub use report::{build_report, write_report, Report};
pub use runner::{run_experiment, Experiment};

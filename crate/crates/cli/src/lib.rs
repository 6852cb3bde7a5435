//! Configuration, experiment registry and runner behind the `fracflow`
//! binary.

pub mod config;
pub mod experiments;
pub mod registry;
pub mod runner;

pub use config::RunConfig;
pub use runner::{execute, replay, run_experiment, Check, Outcome, RunManifest};

//! Experiment runner for pay-per-click auction mechanisms: instance and
//! config file formats, the trial fan-out, the verification checks, and
//! parameter sweeps. The binary in this crate wires these into the
//! `simulate`, `verify`, `sweep`, and `demo-negative` subcommands.

pub mod config;
pub mod formats;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{ConfigFile, ExperimentConfig};
pub use formats::{load_instance, InstanceFile, SCHEMA_VERSION};
pub use report::{run_checks, VerifyReport, KNOWN_CHECKS};
pub use runner::{run_trials, summarize, write_trials_csv, SimulationSummary, TrialRow};
pub use sweep::{run_sweep, write_sweep_csv, SweepParameter, SweepSummary};

//! Command-line orchestration for the `silt` toolkit: experiment configs,
//! the E B_n cache, and the CSV/JSON outputs of each run.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod config;
pub mod error;
pub mod run;

pub use config::{Diagnostic, ExperimentConfig, ExperimentKind, Severity};
pub use error::{CliError, Result};
pub use run::{run, KappaReport, RunManifest, RunOutcome};

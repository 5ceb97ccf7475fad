//! Experiment specs, run registry, artifact output and acceptance suites.

pub mod artifacts;
pub mod error;
pub mod experiments;
pub mod registry;
pub mod spec;
pub mod suites;

pub use error::{CliError, CliResult};
pub use registry::{read_specs, run, run_batch, Registry, RunRecord, RunStatus};
pub use spec::{ExperimentSpec, Target};
pub use suites::{run_suite, SuiteName, SuiteReport};

//! Configuration-driven runs, seed sweeps, and their CSV and JSON artifacts.

mod config;
mod record;
mod report;
mod run;
mod sweep;

pub use config::{ExpertClassSpec, OutputPaths, RunConfig, CONFIG_KEYS};
pub use record::{Algorithm, Measurement, RunRecord, TraceRow};
pub use report::{
    all_applicable_hold, config_hash, read_trace, trace_to_string, write_trace, RunOutput, Summary, SCHEMA_VERSION,
    TRACE_COLUMNS,
};
pub use run::run_experiment;
pub use sweep::{sweep, SeedFailure, SeedOutcome, SweepReport};

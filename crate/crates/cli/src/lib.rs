//! Experiment runner for the `btao` optimizer: configuration, trial
//! orchestration, CSV output, a reference protocol trainer and self-checks.

pub mod config;
pub mod experiment;
pub mod output;
pub mod stub;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig, Method, ObjectiveChoice, Overrides};
pub use experiment::{run_experiment, write_reports, MethodReport};
pub use output::{emit_csv, read_csv, RegretRow, RegretTable};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const RUNTIME: i32 = 2;
}

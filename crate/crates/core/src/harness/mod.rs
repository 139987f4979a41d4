//! Configuration, the simulation loop, run checks and artifact emission.

mod artifacts;
mod checks;
mod config;
mod run;

pub use artifacts::{csv_header, emit_artifacts, write_csv, LyapunovSummary, Summary};
pub use checks::{analyze, CheckWindows, ObserverChecks, RunChecks, W_INCREASE_TOL};
pub use config::{
    load_config, ConfigFile, InitialSection, InputMode, ObserverSelection, RunConfig, RunSection,
    ScenarioSection, SensorMode,
};
pub use run::{
    prepare, run_scenario, scaling_identity_residual, MonitorEntry, MonitorSample, ObserverRecord,
    Row, RunContext, RunLog, DIVERGENCE_LIMIT,
};

//! Scenario files, built-in presets, sweeps and run outputs for the
//! `chemotaxis` command-line tool.

pub mod check;
pub mod output;
pub mod presets;
pub mod runner;
pub mod scenario;

pub use runner::{compare_2d_3d, run_scenario, run_scenario_to, run_sweep, OutputTarget, RunSummary, ScenarioRun};
pub use scenario::{load_scenario, load_sweep, resolve_scenario, Scenario, SweepSpec};

//! Scenario runner for `semiflow-core`: TOML scenarios in, trajectory CSVs
//! and check reports out.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod error;
pub mod runner;

pub use config::{parse_scenario, parse_scenario_str, CheckName, CheckSpec, Scenario};
pub use error::{CliError, CliResult};
pub use runner::{
    build_setup, evaluate_check, run_checks, run_flows, run_scenario, run_sweep, write_flows,
    write_reports, write_sweep, CheckOutcome, Flows, Setup, SuiteResult, SweepAxis, SweepTable,
};

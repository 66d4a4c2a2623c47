//! Fairness metrics, the source/target parity bound, and the experiment
//! runner behind the `rfr` command.

pub mod bound;
pub mod cli;
pub mod config;
pub mod error;
pub mod metrics;
pub mod report;
pub mod runner;

pub use bound::{check_bound, BoundReport};
pub use config::{default_toy, DatasetSpec, ExperimentConfig, Method, Overrides, ShiftSpec};
pub use error::{Error, Result};
pub use metrics::{evaluate, evaluate_predictions, FairnessReport, DEFAULT_THRESHOLD};
pub use report::{render_table, summarize, CellSummary, Stat};
pub use runner::{prepare_splits, read_records, run_cell, run_experiment, write_outputs, Outcome, RunRecord, SCHEMA_VERSION};

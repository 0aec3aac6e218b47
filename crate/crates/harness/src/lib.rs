//! Experiment runner: configured simulation sweeps over the linear, GP and
//! toy settings, the smoking-cessation comparison, and CSV, summary and SVG
//! output.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod smoking;

pub use config::{ExperimentConfig, ExperimentKind, ProxyMode};
pub use error::{HarnessError, Result};
pub use experiment::{
    advantages_by_group, check_failures, run_experiment, run_simulations, SimulationResult,
};
pub use output::{emit_csv, emit_summary_csv, read_results_csv, write_metadata};
pub use plot::emit_boxplot_svg;

//! Experiment orchestration: configuration, seeded sweeps, aggregation and
//! CSV output.

mod aggregate;
mod config;
mod emit;
mod presets;
mod run;
pub mod seeds;
mod table;

pub use aggregate::{aggregate, Summary, SummaryRow};
pub use config::{snr_grid, Clustering, ExperimentConfig, NetworkSpec, Overrides};
pub use emit::{emit, emit_summary, write_plot, write_summary, OutputPaths, PLOT_HEADER, SUMMARY_HEADER};
pub use presets::{Preset, FIG3_TOML, FIG5_TOML};
pub use run::{build_layout, combinations, realize, rows_per_trial, run_experiment, run_experiment_with, Realization, MAX_FAILED_FRACTION};
pub use table::{sig6, ResultRow, ResultTable, RowStatus, RAW_HEADER};

//! Config parsing, training runs, learning-rate sweeps and rank reports.

mod config;
mod report;
mod run;
mod sweep;

pub use config::{
    ActivationName, ArchConfig, EncodingName, ExperimentConfig, OptimConfig, OptimName, PhantomName, RawConfig, ScheduleName, ShapeName,
    TaskConfig, DEFAULT_GAUSSIAN_A,
};
pub use report::{load_trace, rank_report, Comparison, RankReport, SeriesSummary, COMPARISON_HEADER, LONG_HEADER, SUMMARY_HEADER};
pub use run::{build_task, evaluate, run_experiment, run_on_task, sdf_grid_csv, train, write_artifacts, RunOutput};
pub use sweep::{run_sweep, select_best, SweepResult, SweepRow, SweepSpec, ADAM_GRID, AUX_GRID, MUON_GRID, RESULTS_HEADER};

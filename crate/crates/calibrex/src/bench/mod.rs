//! Estimator-assessment benchmark: synthetic score distributions with known
//! ground-truth calibration errors, bootstrapped evaluation sets across
//! holdout sizes, percentile approximation errors, and median aggregation
//! into a ranking report.

mod config;
mod report;
mod runner;

pub use config::{
    log_spaced_sizes, BandwidthHeuristic, BandwidthPolicy, BenchConfig, BinHeuristic, BinPolicy,
    EstimatorConfig, ModelConfig,
};
pub use report::{assemble_report, group_errors, BenchmarkReport, GroupedErrors, Provenance, ReportRow};
pub use runner::{
    apply_estimator, cell_grid, compute_cell, estimate_for_setting, evaluate_estimator,
    ground_truth_ece, run_benchmark, run_cells, score_dataset, truth_from_scores, CellCoords,
    CellOutcome, CellRow, EvalSummary, RunOptions,
};

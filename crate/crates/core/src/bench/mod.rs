//! Benchmark harness: coverage and region-size metrics, seeded runs over
//! several methods, OT-CP hyperparameter sweeps and contour export.

mod config;
mod metrics;
mod run;

pub use config::{BenchConfig, DataSource};
pub use metrics::{marginal_coverage, region_size_mc, residual_extent, Bounds};
pub use run::{
    export_contours, fit_cell, mean_region_size, mean_se, median, run_benchmark, sweep, sweep_csv, BenchReport,
    FittedCell, MethodSummary, RunRow, SWEEP_EPSILONS, SWEEP_TARGETS,
};

//! Simulation study: synthetic three-species data on a lattice, retention
//! thinning, surface RMSE, and interval coverage.

mod config;
mod evaluate;
mod generate;
mod retention;
mod study;

pub use config::{FieldKind, SimConfig};
pub use evaluate::{
    correlation_intervals, coverage_of, coverage_report, intervals, parameter_truths, posterior_mean_field,
    rmse_surface, total_intervals, Coverage, Interval,
};
pub use generate::{simulate_dataset, SimData, SimTruth};
pub use retention::{apply_retention, retained_count, MIN_RETAINED};
pub use study::{run_study, CoverageRow, FailureRow, IntervalRow, RmseRow, StudyConfig, StudyReport};

//! File formats: dataset CSVs, run configuration, sample persistence,
//! summary tables, and the checksummed run manifest.

mod config;
mod dataset;
mod real;
mod reports;
mod samples;
mod table;
mod write;

pub use config::{KappaSource, RunConfig};
pub use dataset::{
    covariates_csv, culls_csv, edges_csv, grid_csv, kappa_csv, load_dataset, load_kappa, observations_csv, DataPaths,
    LoadedData, CULLS_HEADER, EDGES_HEADER, GRID_HEADER, KAPPA_HEADER, OBSERVATIONS_HEADER,
};
pub use real::fmt_real;
pub use reports::{
    county_estimates_csv, coverage_csv, diagnostics_csv, failures_csv, intervals_csv, parameters_csv, rmse_csv,
    totals_csv,
};
pub use samples::{list_fits, read_fit, scenario_dir, write_samples, ChainFile, RhatEntry, SampleSidecar, StoredFit};
pub use write::{
    sha256_hex, write_atomic, CsvText, FileRecord, OutputDir, RowWriter, RunManifest, TaskRecord, TaskStatus,
    MANIFEST_FILE,
};

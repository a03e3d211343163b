//! Experiment presets, convergence studies, the self-test suite and mesh
//! statistics.

pub mod config;
pub mod convergence;
pub mod meshinfo;
pub mod selftest;

pub use config::{ExperimentConfig, Method, OutputConfig, ReferenceConfig, Workers};
pub use convergence::{
    compute_reference, fit_slope, order_statistic, read_csv, run_convergence, write_csv,
    ConvergenceReport, ConvergenceRow, LevelSummary, Summary, CSV_HEADER,
};
pub use meshinfo::{experiment_mesh, mesh_report, write_size_scatter, MeshReport};
pub use selftest::{manufactured_errors, run_selftest, CheckResult, SelftestOptions};

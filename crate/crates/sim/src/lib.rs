//! Experiment runner, result files and figure recipes for the cell-free OTFS
//! simulator, plus a Clarabel-backed conic solver.
//!
//! The numerical work lives in `cellfree-otfs-core`; this crate adds the
//! parts that need `std`: threads, files, JSON and CSV, and the `cfotfs`
//! command-line tool.

pub mod backend;
pub mod error;
pub mod figures;
pub mod output;
pub mod runner;
pub mod spec;
pub mod stats;
pub mod validate;

pub use backend::ClarabelBackend;
pub use error::HarnessError;
pub use runner::{run_experiment, run_sweep, ResultRecord, RunOptions};
pub use spec::ExperimentSpec;
pub use stats::{cdf_stats, CdfStats};

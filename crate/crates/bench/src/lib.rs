//! Benchmark harness for the `cmprisk` methods.
//!
//! A grid configuration lists scenario cells of the simulation generator and
//! the methods to compare. Every (cell, replicate, method) triple is fitted on
//! an 80/20 split of freshly generated data and scored on the held-out part;
//! failures are recorded in the results file rather than aborting the run.

pub mod aggregate;
pub mod config;
pub mod external;
pub mod results;
pub mod runner;

pub use aggregate::{aggregate, write_summary, GroupSummary, MetricSummary};
pub use config::{Cell, GridConfig, Method, MethodOptions};
pub use external::{run_external, ExternalReport};
pub use results::{load_results, read_results, save_results, write_results, ResultRow, Status, RESULTS_HEADER};
pub use runner::{evaluate, fit_method, run_grid, split_indices};

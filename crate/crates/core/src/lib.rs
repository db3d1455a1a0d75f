//! Competing-risk survival analysis toolkit.
//!
//! The crate covers the full pipeline used to compare high-dimensional
//! competing-risk methods on simulated data:
//!
//! - [`data`]: right-censored competing-risk records, CSV ingestion, risk sets.
//! - [`step`]: right-continuous step functions (survival curves, CIFs, hazards).
//! - [`nonparam`]: Kaplan–Meier, Aalen–Johansen, Nelson–Aalen and the transforms
//!   between cause-specific and subdistribution quantities.
//! - [`ipcw`]: inverse-probability-of-censoring weights.
//! - [`psdh`]: proportional subdistribution hazards likelihood machinery.
//! - [`finegray`]: penalized Fine–Gray regression (LASSO, SCAD, MCP).
//! - [`coxboost`]: componentwise likelihood boosting for the Fine–Gray model.
//! - [`forest`]: random survival forests for competing risks.
//! - [`deephit`]: discrete-time multitask network with analytic gradients.
//! - [`simgen`]: two-cause Fine–Gray data generator.
//! - [`metrics`]: TPR, FDR, coefficient error, c-index, time-dependent AUC, IBS.
//!
//! Event type 1 is the event of interest throughout; status 0 is censoring.

pub mod coxboost;
pub mod data;
pub mod deephit;
pub mod error;
pub mod finegray;
pub mod forest;
pub mod ipcw;
pub mod metrics;
pub mod nonparam;
pub mod psdh;
pub mod simgen;
pub mod step;

pub use data::{CsvSchema, Dataset, SubjectRecord};
pub use error::{Error, Result};
pub use step::StepFunction;

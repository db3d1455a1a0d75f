//! Time-dependent inverse-probability-of-censoring weights
//! `w_i(t) = I(C_i >= T_i ∧ t) G(t) / G(T_i ∧ t)`.
//!
//! The censoring indicator is evaluated from observables: a subject counts
//! when it had an event, or when it was censored no earlier than `t`. `G` is
//! read as a left limit at both arguments.

use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::nonparam::censoring_survival;
use crate::step::StepFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpcwWeight {
    pub value: f64,
    /// The denominator `G(T_i ∧ t)` was zero and the weight was set to 0.
    pub guarded: bool,
}

pub fn ipcw_weight(record: &SubjectRecord, t: f64, g_hat: &StepFunction) -> IpcwWeight {
    let observed = record.status >= 1 || record.time >= t;
    if !observed {
        return IpcwWeight {
            value: 0.0,
            guarded: false,
        };
    }
    let denom = g_hat.eval_left(record.time.min(t));
    if denom <= 0.0 {
        log::debug!("censoring survival is zero at {}; weight set to 0", record.time.min(t));
        return IpcwWeight {
            value: 0.0,
            guarded: true,
        };
    }
    IpcwWeight {
        value: g_hat.eval_left(t) / denom,
        guarded: false,
    }
}

/// Dense `n x m` weights over the distinct event times of a dataset.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    pub times: Vec<f64>,
    weights: Vec<f64>,
    n: usize,
    /// Number of entries set to 0 by the zero-denominator guard.
    pub guarded: usize,
}

impl WeightMatrix {
    pub fn n_subjects(&self) -> usize {
        self.n
    }

    pub fn get(&self, subject: usize, time_index: usize) -> f64 {
        self.weights[subject * self.times.len() + time_index]
    }

    pub fn row(&self, subject: usize) -> &[f64] {
        let m = self.times.len();
        &self.weights[subject * m..(subject + 1) * m]
    }

    /// Column of the given event time, if it is one of the matrix times.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|s| s.total_cmp(&t)).ok()
    }
}

pub fn weight_matrix(dataset: &Dataset) -> Result<WeightMatrix> {
    if !dataset.has_events() {
        return Err(Error::InvalidInput("weight matrix needs at least one event".into()));
    }
    let g_hat = censoring_survival(dataset);
    let times = dataset.distinct_event_times();
    let mut weights = Vec::with_capacity(dataset.n() * times.len());
    let mut guarded = 0;
    for r in dataset.records() {
        for &t in &times {
            let w = ipcw_weight(r, t, &g_hat);
            guarded += w.guarded as usize;
            weights.push(w.value);
        }
    }
    Ok(WeightMatrix {
        times,
        weights,
        n: dataset.n(),
        guarded,
    })
}

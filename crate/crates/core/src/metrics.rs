//! Evaluation metrics: variable selection (TPR, FDR), coefficient error,
//! cause-specific concordance, IPCW time-dependent AUC and (integrated)
//! Brier score.

use std::collections::BTreeSet;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nonparam::censoring_survival;
use crate::step::StepFunction;

pub const DEFAULT_HORIZON: f64 = 10.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub tpr: Option<f64>,
    pub fdr: Option<f64>,
    pub betaerr: Option<f64>,
    pub cindex: Option<f64>,
    pub auc_t: Option<f64>,
    pub ibs_t: Option<f64>,
    pub horizon: f64,
}

/// `(TPR, FDR)`; FDR is 0 for an empty selection.
pub fn tpr_fdr(selected: &[usize], true_set: &[usize]) -> Result<(f64, f64)> {
    if true_set.is_empty() {
        return Err(Error::InvalidInput("true covariate set is empty".into()));
    }
    let truth: BTreeSet<usize> = true_set.iter().copied().collect();
    let sel: BTreeSet<usize> = selected.iter().copied().collect();
    let tp = sel.intersection(&truth).count() as f64;
    let fp = sel.difference(&truth).count() as f64;
    let tpr = tp / truth.len() as f64;
    let fdr = if sel.is_empty() { 0.0 } else { fp / sel.len() as f64 };
    Ok((tpr, fdr))
}

/// Sum of squared coefficient differences.
pub fn beta_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "coefficient lengths differ: {} vs {}",
            estimate.len(),
            truth.len()
        )));
    }
    Ok(estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum())
}

fn check_lengths(values: usize, dataset: &Dataset) -> Result<()> {
    if values != dataset.n() {
        return Err(Error::InvalidInput(format!(
            "{values} predictions for {} subjects",
            dataset.n()
        )));
    }
    Ok(())
}

fn concordance(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

/// Concordance index for event type `cause`.
///
/// A pair `(i, j)` is comparable when `i` had a type-`cause` event at
/// `T_i <= horizon`, and `j` either outlived `T_i` or had a competing event
/// by `T_i`. Risk ties count one half. `None` when no pair is comparable.
pub fn cindex(risks: &[f64], dataset: &Dataset, cause: u32, horizon: f64) -> Result<Option<f64>> {
    check_lengths(risks.len(), dataset)?;
    let rec = dataset.records();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, ri) in rec.iter().enumerate() {
        if ri.status != cause || ri.time > horizon {
            continue;
        }
        for (j, rj) in rec.iter().enumerate() {
            if i == j {
                continue;
            }
            let comparable =
                rj.time > ri.time || (rj.status != 0 && rj.status != cause && rj.time <= ri.time);
            if comparable {
                den += 1.0;
                num += concordance(risks[i], risks[j]);
            }
        }
    }
    Ok((den > 0.0).then(|| num / den))
}

/// IPCW estimate of `P(R_i > R_j | T_i <= t*, cause_i = k, T_j > t*)`.
pub fn auc_t(
    risks: &[f64],
    dataset: &Dataset,
    cause: u32,
    horizon: f64,
    g_hat: &StepFunction,
) -> Result<Option<f64>> {
    check_lengths(risks.len(), dataset)?;
    let rec = dataset.records();
    let cases: Vec<(f64, f64)> = rec
        .iter()
        .zip(risks)
        .filter(|(r, _)| r.status == cause && r.time <= horizon)
        .filter_map(|(r, &risk)| {
            let g = g_hat.eval_left(r.time);
            (g > 0.0).then(|| (risk, 1.0 / g))
        })
        .collect();
    let g_h = g_hat.eval(horizon);
    if g_h <= 0.0 {
        return Ok(None);
    }
    let controls: Vec<f64> = rec
        .iter()
        .zip(risks)
        .filter(|(r, _)| r.time > horizon)
        .map(|(_, &risk)| risk)
        .collect();
    if cases.is_empty() || controls.is_empty() {
        return Ok(None);
    }
    let wc = 1.0 / g_h;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(ri, wi) in &cases {
        for &rj in &controls {
            num += wi * wc * concordance(ri, rj);
            den += wi * wc;
        }
    }
    Ok(Some(num / den))
}

/// IPCW weight of subject at time `u` for the Brier score, with a guard flag.
fn brier_weight(time: f64, status: u32, u: f64, g_hat: &StepFunction) -> (f64, bool) {
    if time <= u {
        if status == 0 {
            return (0.0, false);
        }
        let g = g_hat.eval_left(time);
        if g > 0.0 {
            (1.0 / g, false)
        } else {
            (0.0, true)
        }
    } else {
        let g = g_hat.eval(u);
        if g > 0.0 {
            (1.0 / g, false)
        } else {
            (0.0, true)
        }
    }
}

/// Brier score at `horizon` for predicted cause-`cause` CIF values.
pub fn brier_t(
    predicted: &[f64],
    dataset: &Dataset,
    cause: u32,
    horizon: f64,
    g_hat: &StepFunction,
) -> Result<f64> {
    check_lengths(predicted.len(), dataset)?;
    let mut guarded = 0;
    let total: f64 = dataset
        .records()
        .iter()
        .zip(predicted)
        .map(|(r, &p)| {
            let n_i = if r.time <= horizon && r.status == cause { 1.0 } else { 0.0 };
            let (w, g) = brier_weight(r.time, r.status, horizon, g_hat);
            guarded += g as usize;
            (n_i - p) * (n_i - p) * w
        })
        .sum();
    if guarded > 0 {
        log::debug!("brier score: {guarded} subjects with zero censoring survival got weight 0");
    }
    Ok(total / dataset.n() as f64)
}

/// `(1/t*) * integral_0^{t*} BS(u) du`, integrated exactly over the
/// piecewise-constant Brier curve. The censoring distribution is estimated
/// from `dataset`.
pub fn ibs_t(trajectories: &[StepFunction], dataset: &Dataset, cause: u32, horizon: f64) -> Result<f64> {
    check_lengths(trajectories.len(), dataset)?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let g_hat = censoring_survival(dataset);
    let mut grid: Vec<f64> = dataset
        .records()
        .iter()
        .map(|r| r.time)
        .chain(trajectories.iter().flat_map(|f| f.times().iter().copied()))
        .chain(g_hat.times().iter().copied())
        .filter(|&t| t > 0.0 && t < horizon)
        .collect();
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut area = 0.0;
    for (k, &a) in grid.iter().enumerate() {
        let b = grid.get(k + 1).copied().unwrap_or(horizon);
        let preds: Vec<f64> = trajectories.iter().map(|f| f.eval(a)).collect();
        area += brier_t(&preds, dataset, cause, a, &g_hat)? * (b - a);
    }
    Ok(area / horizon)
}

/// Cause-`cause` c-index, AUC and IBS at `horizon` for predicted CIF
/// trajectories on a test set.
pub fn prediction_metrics(
    trajectories: &[StepFunction],
    test: &Dataset,
    cause: u32,
    horizon: f64,
) -> Result<MetricsReport> {
    let risks: Vec<f64> = trajectories.iter().map(|f| f.eval(horizon)).collect();
    let g_hat = censoring_survival(test);
    Ok(MetricsReport {
        cindex: cindex(&risks, test, cause, horizon)?,
        auc_t: auc_t(&risks, test, cause, horizon, &g_hat)?,
        ibs_t: Some(ibs_t(trajectories, test, cause, horizon)?),
        horizon,
        ..MetricsReport::default()
    })
}

//! Fit one method on one simulated replicate and score it.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cmprisk::coxboost::{boost_fit, choose_steps_cv, default_penalty, BoostConfig};
use cmprisk::deephit::{fit_network, DeepHitModel, NetConfig};
use cmprisk::finegray::{fit_path_with, select_bic, PenaltyKind, DEFAULT_MAX_ITER, DEFAULT_TOL};
use cmprisk::forest::{fit_forest, minimal_depth, select_variables, variable_importance, ForestConfig};
use cmprisk::metrics::{beta_error, prediction_metrics, tpr_fdr, MetricsReport};
use cmprisk::simgen::{generate, TrueEffects};
use cmprisk::{Dataset, StepFunction};

use crate::config::{GridConfig, Method, MethodOptions};
use crate::results::{ResultRow, Status};

/// Selected covariates, coefficients where the method has them, and
/// cause-1 CIF trajectories for the test subjects.
#[derive(Debug, Clone)]
pub struct MethodFit {
    pub selected: Option<Vec<usize>>,
    pub beta: Option<Vec<f64>>,
    pub test_cifs: Vec<StepFunction>,
}

/// Random train/test split of `0..n`; the training part has `round(f n)` rows.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn penalty_kind(method: Method) -> PenaltyKind {
    match method {
        Method::Lasso => PenaltyKind::Lasso,
        Method::Scad => PenaltyKind::Scad,
        _ => PenaltyKind::Mcp,
    }
}

/// Fit `method` on `train` and predict the cause-1 CIF of every `test` subject.
pub fn fit_method(method: Method, train: &Dataset, test: &Dataset, options: &MethodOptions, seed: u64) -> Result<MethodFit> {
    let xs: Vec<&[f64]> = (0..test.n()).map(|i| test.x(i)).collect();
    match method {
        Method::Lasso | Method::Scad | Method::Mcp => {
            let path = fit_path_with(train, penalty_kind(method), options.path_len, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let converged: Vec<_> = path.into_iter().filter_map(|f| f.ok()).filter(|f| f.converged).collect();
            if converged.is_empty() {
                bail!("no lambda on the path converged");
            }
            let best = select_bic(&converged, train.n())?;
            let model = best.model(train)?;
            let cifs = xs.iter().map(|x| model.predict_cif(x)).collect();
            Ok(MethodFit { selected: Some(best.selected.clone()), beta: Some(best.beta), test_cifs: cifs })
        }
        Method::CoxBoost => {
            let lambda = default_penalty(train);
            let steps = choose_steps_cv(train, options.cv_folds, options.boost_steps, lambda, seed)?;
            let trace = boost_fit(train, &BoostConfig::for_dataset(train, steps))?;
            let model = trace.model(train)?;
            let cifs = xs.iter().map(|x| model.predict_cif(x)).collect();
            Ok(MethodFit { selected: Some(trace.selected), beta: Some(trace.beta), test_cifs: cifs })
        }
        Method::RForest => {
            let config = ForestConfig {
                n_trees: options.trees,
                min_node_size: options.min_node_size,
                rule: options.split_rule,
                horizon: options.horizon,
                ..ForestConfig::for_dataset(train, seed)
            };
            let forest = fit_forest(train, &config)?;
            let importance = variable_importance(&forest, train)?;
            let selected = select_variables(&importance.vimp, &minimal_depth(&forest));
            let cifs = xs.iter().map(|x| forest.predict_cif(x, 1)).collect::<cmprisk::Result<_>>()?;
            Ok(MethodFit { selected: Some(selected), beta: None, test_cifs: cifs })
        }
        Method::DeepHit => {
            let config = NetConfig {
                epochs: options.deephit_epochs,
                bins: options.deephit_bins,
                seed,
                ..NetConfig::default()
            };
            let model = fit_network(train, &config)?;
            let cifs = model
                .predict_pmfs(&xs)?
                .iter()
                .map(|pmf| DeepHitModel::trajectory(pmf, &model.edges, 1))
                .collect::<cmprisk::Result<_>>()?;
            Ok(MethodFit { selected: None, beta: None, test_cifs: cifs })
        }
    }
}

/// Fit and score one method on one replicate.
pub fn evaluate(method: Method, data: &Dataset, options: &MethodOptions, seed: u64) -> Result<MetricsReport> {
    let (train_idx, test_idx) = split_indices(data.n(), options.train_fraction, seed);
    let (train, test) = (data.subset(&train_idx), data.subset(&test_idx));
    let fit = fit_method(method, &train, &test, options, seed)?;
    let mut report = prediction_metrics(&fit.test_cifs, &test, 1, options.horizon)?;
    let truth = TrueEffects::true_set();
    if let Some(selected) = &fit.selected {
        let (tpr, fdr) = tpr_fdr(selected, &truth)?;
        report.tpr = Some(tpr);
        report.fdr = Some(fdr);
    }
    if let Some(beta) = &fit.beta {
        report.betaerr = Some(beta_error(beta, &TrueEffects::default().beta1_padded(data.p()))?);
    }
    Ok(report)
}

/// One (cell, replicate, method) task of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Task {
    pub cell: usize,
    pub replicate: usize,
    pub method: usize,
}

pub fn tasks(config: &GridConfig) -> Vec<Task> {
    let mut out = Vec::with_capacity(config.n_tasks());
    for (cell, c) in config.cells.iter().enumerate() {
        for replicate in 0..c.replicates {
            for method in 0..config.methods.len() {
                out.push(Task { cell, replicate, method });
            }
        }
    }
    out
}

pub fn run_task(config: &GridConfig, task: Task) -> ResultRow {
    let cell = &config.cells[task.cell];
    let method = config.methods[task.method];
    let spec = cell.replicate_spec(task.replicate);
    let start = Instant::now();
    let outcome = generate(&spec)
        .context("generating data")
        .and_then(|data| evaluate(method, &data, &config.options, spec.seed));
    let wall = start.elapsed().as_secs_f64();
    let (status, report) = match outcome {
        Ok(report) => (Status::Success, report),
        Err(e) => {
            log::warn!("{} replicate {} {}: {e:#}", cell.id, task.replicate, method);
            (Status::Failed, MetricsReport::default())
        }
    };
    ResultRow::new(cell, task.replicate, method, status, &report, wall)
}

/// Run every task of the grid on `jobs` worker threads. Rows come back in
/// (cell, replicate, method) order regardless of scheduling.
pub fn run_grid(config: &GridConfig, jobs: usize) -> Result<Vec<ResultRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")?;
    let all = tasks(config);
    let total = all.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let mut rows: Vec<(Task, ResultRow)> = pool.install(|| {
        all.par_iter()
            .map(|&t| {
                let row = run_task(config, t);
                let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                log::info!("[{k}/{total}] {} rep {} {}: {}", row.scenario, row.replicate, row.method, row.status);
                (t, row)
            })
            .collect()
    });
    rows.sort_by_key(|(t, _)| *t);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_partition() {
        let (a, b) = split_indices(101, 0.8, 3);
        assert_eq!(a.len(), 81);
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_eq!(split_indices(101, 0.8, 3), (a, b));
    }
}

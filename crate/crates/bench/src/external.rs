//! Fit one method on a full external dataset and write its reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cmprisk::coxboost::{boost_fit, choose_steps_cv, default_penalty, BoostConfig};
use cmprisk::deephit::{fit_network, NetConfig};
use cmprisk::finegray::{fit_path_with, select_bic, DEFAULT_MAX_ITER, DEFAULT_TOL};
use cmprisk::forest::{fit_forest, minimal_depth, select_variables, variable_importance, ForestConfig};
use cmprisk::psdh::PsdhModel;
use cmprisk::{Dataset, StepFunction};

use crate::config::{Method, MethodOptions};

/// Files written by [`run_external`] and the selected covariates, ordered by
/// decreasing absolute effect (or importance for the forest).
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalReport {
    pub files: Vec<PathBuf>,
    pub selected: Vec<(String, f64)>,
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

/// `subject,cause,time,cif`, starting at time 0 with the value before the first jump.
fn write_trajectories(path: &Path, curves: &[(usize, usize, StepFunction)]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["subject", "cause", "time", "cif"])?;
    for (subject, cause, f) in curves {
        let (s, k) = (subject.to_string(), cause.to_string());
        w.write_record([s.as_str(), k.as_str(), "0", &f.value_before_first().to_string()])?;
        for (t, v) in f.times().iter().zip(f.values()) {
            w.write_record([s.as_str(), k.as_str(), &t.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn coefficient_table(path: &Path, names: &[String], beta: &[f64]) -> Result<Vec<(String, f64)>> {
    let mut rows: Vec<(String, f64)> = names
        .iter()
        .zip(beta)
        .filter(|(_, b)| **b != 0.0)
        .map(|(n, b)| (n.clone(), *b))
        .collect();
    rows.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
    let mut w = create(path)?;
    w.write_record(["covariate", "beta"])?;
    for (n, b) in &rows {
        w.write_record([n.as_str(), &b.to_string()])?;
    }
    w.flush()?;
    Ok(rows)
}

fn psdh_outputs(dataset: &Dataset, model: &PsdhModel, out: &Path, report: &mut ExternalReport) -> Result<()> {
    let selected_path = out.join("selected.csv");
    report.selected = coefficient_table(&selected_path, dataset.covariate_names(), &model.beta)?;
    let curves: Vec<_> = (0..dataset.n()).map(|i| (i, 1, model.predict_cif(dataset.x(i)))).collect();
    let pred_path = out.join("predictions.csv");
    write_trajectories(&pred_path, &curves)?;
    report.files.extend([selected_path, pred_path]);
    Ok(())
}

/// Fit `method` on all of `dataset` and write per-subject CIF trajectories
/// plus the method's variable-selection table into `out`.
pub fn run_external(dataset: &Dataset, method: Method, out: &Path, options: &MethodOptions, seed: u64) -> Result<ExternalReport> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = ExternalReport { files: Vec::new(), selected: Vec::new() };
    match method {
        Method::Lasso | Method::Scad | Method::Mcp => {
            let kind = method.name().parse()?;
            let path = fit_path_with(dataset, kind, options.path_len, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let converged: Vec<_> = path.into_iter().filter_map(|f| f.ok()).filter(|f| f.converged).collect();
            anyhow::ensure!(!converged.is_empty(), "no lambda on the {method} path converged");
            let best = select_bic(&converged, dataset.n())?;
            log::info!("{method}: lambda {} selected by BIC, {} nonzero", best.lambda, best.df());
            psdh_outputs(dataset, &best.model(dataset)?, out, &mut report)?;
        }
        Method::CoxBoost => {
            let folds = options.cv_folds.min(dataset.n());
            let steps = choose_steps_cv(dataset, folds, options.boost_steps, default_penalty(dataset), seed)?;
            log::info!("coxboost: {steps} steps chosen by {folds}-fold cross-validation");
            let trace = boost_fit(dataset, &BoostConfig::for_dataset(dataset, steps))?;
            let trace_path = out.join("boost_trace.csv");
            trace.write_csv(BufWriter::new(File::create(&trace_path)?), dataset.covariate_names())?;
            report.files.push(trace_path);
            psdh_outputs(dataset, &trace.model(dataset)?, out, &mut report)?;
        }
        Method::RForest => {
            let config = ForestConfig {
                n_trees: options.trees,
                min_node_size: options.min_node_size,
                rule: options.split_rule,
                horizon: options.horizon,
                ..ForestConfig::for_dataset(dataset, seed)
            };
            let forest = fit_forest(dataset, &config)?;
            let importance = variable_importance(&forest, dataset)?;
            if importance.degenerate > 0 {
                log::warn!("{} trees had no comparable out-of-bag pair", importance.degenerate);
            }
            let depth = minimal_depth(&forest);
            let chosen = select_variables(&importance.vimp, &depth);
            let names = dataset.covariate_names();
            let mut order: Vec<usize> = (0..names.len()).collect();
            order.sort_by(|&a, &b| importance.vimp[b].total_cmp(&importance.vimp[a]).then(a.cmp(&b)));
            let imp_path = out.join("importance.csv");
            let mut w = create(&imp_path)?;
            w.write_record(["covariate", "vimp", "min_depth", "selected"])?;
            for &j in &order {
                let sel = chosen.contains(&j);
                w.write_record([names[j].as_str(), &importance.vimp[j].to_string(), &depth[j].to_string(), &sel.to_string()])?;
                if sel {
                    report.selected.push((names[j].clone(), importance.vimp[j]));
                }
            }
            w.flush()?;
            let mut curves = Vec::new();
            for i in 0..dataset.n() {
                for k in 1..=dataset.n_causes() {
                    curves.push((i, k as usize, forest.predict_cif(dataset.x(i), k)?));
                }
            }
            let pred_path = out.join("predictions.csv");
            write_trajectories(&pred_path, &curves)?;
            let summary_path = out.join("forest.csv");
            forest.write_summary(BufWriter::new(File::create(&summary_path)?))?;
            report.files.extend([imp_path, pred_path, summary_path]);
        }
        Method::DeepHit => {
            let config = NetConfig {
                epochs: options.deephit_epochs,
                bins: options.deephit_bins,
                seed,
                ..NetConfig::default()
            };
            let model = fit_network(dataset, &config)?;
            log::info!("deephit: no variable selection table for this method");
            let pred_path = out.join("predictions.csv");
            let subjects: Vec<usize> = (0..dataset.n()).collect();
            let rows: Vec<&[f64]> = subjects.iter().map(|&i| dataset.x(i)).collect();
            let mut file = BufWriter::new(File::create(&pred_path)?);
            model.write_predictions(&mut file, &subjects, &rows)?;
            file.flush()?;
            report.files.push(pred_path);
        }
    }
    Ok(report)
}

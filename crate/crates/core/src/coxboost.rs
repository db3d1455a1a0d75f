//! Componentwise likelihood-based boosting for the Fine–Gray model.
//!
//! Each step first moves all mandatory coefficients by one joint
//! Newton–Raphson step, then scores every optional covariate with a one-step
//! ridge-penalized update from the current offset and adds the update of the
//! best-scoring covariate. Covariates are standardized internally.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::psdh::{PsdhData, PsdhModel};

pub const DEFAULT_STEPS: usize = 100;
const MANDATORY_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    pub steps: usize,
    /// Ridge penalty on each candidate update.
    pub lambda: f64,
    /// Slope of the linear penalty schedule `lambda_m = lambda * (1 + slope * m)`.
    pub lambda_slope: f64,
    pub mandatory: Vec<usize>,
    pub optional: Vec<usize>,
}

impl BoostConfig {
    /// All covariates optional, `lambda = 9 * (number of type-1 events)`.
    pub fn for_dataset(dataset: &Dataset, steps: usize) -> Self {
        Self {
            steps,
            lambda: default_penalty(dataset),
            lambda_slope: 0.0,
            mandatory: Vec::new(),
            optional: (0..dataset.p()).collect(),
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("boosting penalty must be >= 0, got {}", self.lambda)));
        }
        let mut seen = vec![false; p];
        for &j in self.mandatory.iter().chain(&self.optional) {
            if j >= p {
                return Err(Error::Config(format!("covariate index {j} out of range")));
            }
            if seen[j] {
                return Err(Error::Config(format!("covariate {j} listed twice")));
            }
            seen[j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config(
                "mandatory and optional covariates must cover every covariate".into(),
            ));
        }
        Ok(())
    }

    fn penalty_at(&self, step: usize) -> f64 {
        self.lambda * (1.0 + self.lambda_slope * step as f64)
    }
}

pub fn default_penalty(dataset: &Dataset) -> f64 {
    9.0 * dataset.count_events(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostTrace {
    /// Coefficients (original scale) after each step; entry 0 is the zero vector.
    pub beta_by_step: Vec<Vec<f64>>,
    /// Optional covariate chosen at each step.
    pub selected_by_step: Vec<usize>,
    /// Training log partial likelihood after each step, entry 0 at beta = 0.
    pub loglik_by_step: Vec<f64>,
    pub beta: Vec<f64>,
    /// Covariates with nonzero final coefficients.
    pub selected: Vec<usize>,
}

impl BoostTrace {
    /// Whether the training likelihood never decreased across steps.
    pub fn is_ascending(&self) -> bool {
        self.loglik_by_step
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()))
    }

    pub fn model(&self, dataset: &Dataset) -> Result<PsdhModel> {
        PsdhModel::from_coefficients(dataset, self.beta.clone())
    }

    /// `step,selected` rows followed by the final coefficients.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, names: &[String]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record(["step", "selected"])?;
        for (m, j) in self.selected_by_step.iter().enumerate() {
            w.write_record([(m + 1).to_string(), names[*j].clone()])?;
        }
        w.write_record(["covariate", "beta"])?;
        for (name, b) in names.iter().zip(&self.beta) {
            w.write_record([name.clone(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Penalized score step for candidate covariate `j` at the given offset:
/// `(gamma_hat, score_stat) = (U / (I + lambda), U^2 / (I + lambda))`.
pub fn candidate_score(data: &PsdhData, offset: &[f64], j: usize, lambda: f64) -> Result<(f64, f64)> {
    let (w, _) = PsdhData::shifted_exp(offset);
    candidate_from_exp(data, &w, j, lambda)
}

fn candidate_from_exp(data: &PsdhData, offset_exp: &[f64], j: usize, lambda: f64) -> Result<(f64, f64)> {
    let (u, info) = data.coordinate_derivatives(offset_exp, j);
    let pen_info = info + lambda;
    if u == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(pen_info > 0.0) {
        return Err(Error::Numerical(format!(
            "penalized information {pen_info} is not positive for covariate {j}"
        )));
    }
    Ok((u / pen_info, u * u / pen_info))
}

/// Run the boosting loop.
pub fn boost_fit(dataset: &Dataset, config: &BoostConfig) -> Result<BoostTrace> {
    config.validate(dataset.p())?;
    let data = PsdhData::new(dataset, true)?;
    boost_on(&data, config)
}

fn boost_on(data: &PsdhData, config: &BoostConfig) -> Result<BoostTrace> {
    let p = data.p();
    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; data.n()];
    let to_orig = |b: &[f64]| data.standardizer.to_original(b);
    let mut beta_by_step = vec![vec![0.0; p]];
    let mut selected_by_step = Vec::with_capacity(config.steps);
    let mut loglik_by_step = vec![data.log_likelihood(&eta)];
    let optional: Vec<usize> = config
        .optional
        .iter()
        .copied()
        .filter(|&j| !data.standardizer.constant[j])
        .collect();

    for m in 1..=config.steps {
        if !config.mandatory.is_empty() {
            let (w, _) = PsdhData::shifted_exp(&eta);
            let (score, info) = data.block_derivatives(&w, &config.mandatory);
            let q = config.mandatory.len();
            let mut h = DMatrix::from_row_slice(q, q, &info);
            for a in 0..q {
                h[(a, a)] += MANDATORY_RIDGE;
            }
            let step = h
                .lu()
                .solve(&DVector::from_vec(score))
                .ok_or_else(|| Error::Numerical("singular mandatory-covariate information".into()))?;
            for (a, &j) in config.mandatory.iter().enumerate() {
                beta[j] += step[a];
            }
            eta = data.linear_predictor(&beta);
        }
        if !optional.is_empty() {
            let lambda = config.penalty_at(m - 1);
            let (w, _) = PsdhData::shifted_exp(&eta);
            let scores = optional
                .par_iter()
                .map(|&j| candidate_from_exp(data, &w, j, lambda).map(|s| (j, s)))
                .collect::<Result<Vec<_>>>()?;
            // Strictly greater keeps the lowest index on ties.
            let mut best = scores[0];
            for &cand in &scores[1..] {
                if cand.1 .1 > best.1 .1 {
                    best = cand;
                }
            }
            let (j_star, (gamma, _)) = best;
            beta[j_star] += gamma;
            for (i, e) in eta.iter_mut().enumerate() {
                *e += gamma * data.x_ij(i, j_star);
            }
            selected_by_step.push(j_star);
        }
        let ll = data.log_likelihood(&eta);
        if !ll.is_finite() {
            return Err(Error::Divergence {
                message: format!("non-finite likelihood at boosting step {m}"),
                iterate: to_orig(&beta),
            });
        }
        loglik_by_step.push(ll);
        beta_by_step.push(to_orig(&beta));
    }
    let beta = to_orig(&beta);
    let selected = (0..p).filter(|&j| beta[j] != 0.0).collect();
    Ok(BoostTrace {
        beta_by_step,
        selected_by_step,
        loglik_by_step,
        beta,
        selected,
    })
}

/// Number of steps in `0..=max_steps` maximizing the mean held-out log
/// partial likelihood over `folds` random folds. Ties go to fewer steps.
pub fn choose_steps_cv(
    dataset: &Dataset,
    folds: usize,
    max_steps: usize,
    lambda: f64,
    seed: u64,
) -> Result<usize> {
    if folds < 2 {
        return Err(Error::Config("cross-validation needs at least 2 folds".into()));
    }
    if max_steps == 0 {
        return Ok(0);
    }
    let n = dataset.n();
    if n < folds {
        return Err(Error::InvalidInput(format!("{n} subjects cannot fill {folds} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = None;
    for _ in 0..2 {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let parts: Vec<Vec<usize>> = (0..folds)
            .map(|f| perm.iter().copied().skip(f).step_by(folds).collect())
            .collect();
        if parts.iter().all(|idx| idx.iter().any(|&i| dataset.status(i) == 1)) {
            assignment = Some(parts);
            break;
        }
        log::warn!("a fold had no type-1 events; resampling folds");
    }
    let parts = assignment.ok_or(Error::NoEvents { cause: 1 })?;

    let curves = parts
        .par_iter()
        .map(|test_idx| {
            let mut in_test = vec![false; n];
            test_idx.iter().for_each(|&i| in_test[i] = true);
            let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let train = dataset.subset(&train_idx);
            let test = PsdhData::new(&dataset.subset(test_idx), false)?;
            let mut config = BoostConfig::for_dataset(&train, max_steps);
            config.lambda = lambda;
            let trace = boost_fit(&train, &config)?;
            Ok(trace
                .beta_by_step
                .iter()
                .map(|b| test.log_likelihood(&test.linear_predictor(b)))
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = (0, f64::NEG_INFINITY);
    for m in 0..=max_steps {
        let mean = curves.iter().map(|c| c[m]).sum::<f64>() / folds as f64;
        if mean > best.1 {
            best = (m, mean);
        }
    }
    Ok(best.0)
}

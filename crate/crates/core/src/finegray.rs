//! Penalized Fine–Gray regression for event 1.
//!
//! Maximizes `Q(beta) = l(beta) - n * sum_j p_lambda(|beta_j|)` by cyclic
//! coordinatewise Newton updates. Each coordinate uses the diagonal curvature
//! of `l` and a local linear approximation of the penalty, so the update is a
//! soft-threshold at `n * p'_lambda(|beta_j|)`. A halving line search keeps
//! `Q` nondecreasing. Covariates are standardized internally; reported
//! coefficients are on the original scale.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ipcw::WeightMatrix;
use crate::psdh::{PsdhData, PsdhModel};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_PATH_LEN: usize = 20;
pub const PATH_RATIO: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    Lasso,
    Scad,
    Mcp,
}

impl PenaltyKind {
    pub fn default_a(self) -> f64 {
        match self {
            PenaltyKind::Lasso => f64::NAN,
            PenaltyKind::Scad => 3.7,
            PenaltyKind::Mcp => 3.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::Scad => "scad",
            PenaltyKind::Mcp => "mcp",
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Self::Lasso),
            "scad" => Ok(Self::Scad),
            "mcp" => Ok(Self::Mcp),
            other => Err(Error::Config(format!("unknown penalty `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub a: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Self {
        Self {
            kind,
            lambda,
            a: kind.default_a(),
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        match self.kind {
            PenaltyKind::Scad if !(self.a > 2.0) => {
                Err(Error::Config(format!("SCAD requires a > 2, got {}", self.a)))
            }
            PenaltyKind::Mcp if !(self.a > 1.0) => {
                Err(Error::Config(format!("MCP requires a > 1, got {}", self.a)))
            }
            _ => Ok(()),
        }
    }

    /// Penalty value `p_lambda(|beta|)`.
    pub fn value(&self, absbeta: f64) -> f64 {
        let (l, a, b) = (self.lambda, self.a, absbeta);
        match self.kind {
            PenaltyKind::Lasso => l * b,
            PenaltyKind::Scad => {
                if b <= l {
                    l * b
                } else if b <= a * l {
                    (2.0 * a * l * b - b * b - l * l) / (2.0 * (a - 1.0))
                } else {
                    l * l * (a + 1.0) / 2.0
                }
            }
            PenaltyKind::Mcp => {
                if b <= a * l {
                    l * b - b * b / (2.0 * a)
                } else {
                    a * l * l / 2.0
                }
            }
        }
    }
}

/// First derivative `p'_lambda(|beta|)` of the penalty.
pub fn penalty_derivative(spec: &PenaltySpec, absbeta: f64) -> Result<f64> {
    spec.validate()?;
    let (l, a, b) = (spec.lambda, spec.a, absbeta);
    Ok(match spec.kind {
        PenaltyKind::Lasso => l,
        PenaltyKind::Scad => {
            if b <= l {
                l
            } else {
                (a * l - b).max(0.0) / (a - 1.0)
            }
        }
        PenaltyKind::Mcp => (l - b / a).max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: PenaltyKind,
    /// Coefficients for event 1 on the original covariate scale.
    pub beta: Vec<f64>,
    pub selected: Vec<usize>,
    pub lambda: f64,
    pub log_partial_likelihood: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the penalized objective never decreased across cycles.
    pub monotone: bool,
}

impl FitResult {
    pub fn df(&self) -> usize {
        self.selected.len()
    }

    /// `method, lambda, bic, nonzero, beta_1..beta_p`.
    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![
            self.kind.name().to_string(),
            self.lambda.to_string(),
            self.bic.to_string(),
            self.selected.len().to_string(),
        ];
        row.extend(self.beta.iter().map(|b| b.to_string()));
        row
    }

    pub fn model(&self, dataset: &Dataset) -> Result<PsdhModel> {
        PsdhModel::from_coefficients(dataset, self.beta.clone())
    }
}

fn bic(loglik: f64, df: usize, n: usize) -> f64 {
    -2.0 * loglik + df as f64 * (n as f64).ln()
}

/// Fine–Gray log partial likelihood by direct summation over the IPCW weight
/// matrix and the subdistribution at-risk indicator.
pub fn log_partial_likelihood(beta: &[f64], dataset: &Dataset, weights: &WeightMatrix) -> Result<f64> {
    if beta.len() != dataset.p() {
        return Err(Error::InvalidInput(format!(
            "beta has length {}, expected {}",
            beta.len(),
            dataset.p()
        )));
    }
    if dataset.count_events(1) == 0 {
        return Err(Error::NoEvents { cause: 1 });
    }
    let eta: Vec<f64> = dataset
        .records()
        .iter()
        .map(|r| r.covariates.iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect();
    let mut ll = 0.0;
    for (i, r) in dataset.records().iter().enumerate() {
        if r.status != 1 {
            continue;
        }
        let l = weights
            .time_index(r.time)
            .ok_or_else(|| Error::InvalidInput("weight matrix lacks an event time".into()))?;
        let terms: Vec<(f64, f64)> = dataset
            .records()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.time >= r.time || s.status >= 2)
            .map(|(j, _)| (weights.get(j, l), eta[j]))
            .filter(|(w, _)| *w > 0.0)
            .collect();
        let shift = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|(w, e)| w * (e - shift).exp()).sum();
        ll += eta[i] - (sum.ln() + shift);
    }
    Ok(ll)
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Fit at a single penalty level.
pub fn fit(
    dataset: &Dataset,
    spec: &PenaltySpec,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<FitResult> {
    let data = PsdhData::new(dataset, true)?;
    if init.len() != data.p() {
        return Err(Error::InvalidInput(format!(
            "initial value has length {}, expected {}",
            init.len(),
            data.p()
        )));
    }
    let start = data.standardizer.to_standardized(init);
    fit_standardized(&data, spec, start, tol, max_iter).map(|(fit, _)| fit)
}

/// Coordinate ascent on standardized coefficients. Returns the result and the
/// final standardized coefficient vector (for warm starts).
fn fit_standardized(
    data: &PsdhData,
    spec: &PenaltySpec,
    mut beta: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(FitResult, Vec<f64>)> {
    spec.validate()?;
    let p = data.p();
    let n = data.n() as f64;
    if p == 0 {
        return Err(Error::InvalidInput("penalized fit needs at least one covariate".into()));
    }
    for (b, &c) in beta.iter_mut().zip(&data.standardizer.constant) {
        if c {
            *b = 0.0;
        }
    }
    let objective = |ll: f64, beta: &[f64]| ll - n * beta.iter().map(|b| spec.value(b.abs())).sum::<f64>();

    let mut eta = data.linear_predictor(&beta);
    let mut ll = data.log_likelihood(&eta);
    if !ll.is_finite() {
        return Err(Error::Divergence {
            message: "non-finite likelihood at the initial value".into(),
            iterate: data.standardizer.to_original(&beta),
        });
    }
    let mut q = objective(ll, &beta);
    let mut monotone = true;
    let mut converged = false;
    let mut iterations = 0;
    let mut trial = vec![0.0; eta.len()];

    while iterations < max_iter {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if data.standardizer.constant[j] {
                continue;
            }
            let (w, _) = PsdhData::shifted_exp(&eta);
            let (score, info) = data.coordinate_derivatives(&w, j);
            if info <= 1e-12 {
                continue;
            }
            let old = beta[j];
            let threshold = n * penalty_derivative(spec, old.abs())?;
            let mut proposal = soft_threshold(info * old + score, threshold) / info;
            if proposal == old {
                continue;
            }
            let q_old = ll - n * spec.value(old.abs());
            let mut accepted = None;
            for _ in 0..40 {
                let delta = proposal - old;
                for (i, t) in trial.iter_mut().enumerate() {
                    *t = eta[i] + delta * data.x_ij(i, j);
                }
                let ll_new = data.log_likelihood(&trial);
                if ll_new.is_finite() {
                    let q_new = ll_new - n * spec.value(proposal.abs());
                    if q_new >= q_old - 1e-12 * (1.0 + q_old.abs()) {
                        accepted = Some(ll_new);
                        break;
                    }
                }
                proposal = old + 0.5 * (proposal - old);
            }
            if let Some(ll_new) = accepted {
                std::mem::swap(&mut eta, &mut trial);
                ll = ll_new;
                beta[j] = proposal;
                max_change = max_change.max((proposal - old).abs());
            }
        }
        if !ll.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Divergence {
                message: format!("non-finite iterate after {iterations} cycles"),
                iterate: data.standardizer.to_original(&beta),
            });
        }
        let q_new = objective(ll, &beta);
        if q_new < q - 1e-9 * (1.0 + q.abs()) {
            monotone = false;
        }
        q = q_new;
        if max_change < tol {
            converged = true;
            break;
        }
    }

    let original = data.standardizer.to_original(&beta);
    let selected: Vec<usize> = (0..p).filter(|&j| original[j] != 0.0).collect();
    let df = selected.len();
    Ok((
        FitResult {
            kind: spec.kind,
            beta: original,
            selected,
            lambda: spec.lambda,
            log_partial_likelihood: ll,
            bic: bic(ll, df, data.n()),
            iterations,
            converged,
            monotone,
        },
        beta,
    ))
}

/// Smallest lambda with an all-zero solution: `max_j |U_j(0)| / n` on the
/// standardized covariates.
pub fn lambda_max(dataset: &Dataset) -> Result<f64> {
    let data = PsdhData::new(dataset, true)?;
    Ok(lambda_max_of(&data))
}

fn lambda_max_of(data: &PsdhData) -> f64 {
    let ones = vec![1.0; data.n()];
    (0..data.p())
        .filter(|&j| !data.standardizer.constant[j])
        .map(|j| data.coordinate_derivatives(&ones, j).0.abs())
        .fold(0.0, f64::max)
        / data.n() as f64
}

/// Penalty levels log-spaced from `lambda_max` down to `0.01 * lambda_max`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize) -> Vec<f64> {
    (0..n_lambda)
        .map(|k| lambda_max * PATH_RATIO.powf(k as f64 / (n_lambda - 1) as f64))
        .collect()
}

/// Warm-started regularization path. Per-lambda failures are kept in place.
pub fn fit_path(dataset: &Dataset, kind: PenaltyKind, n_lambda: usize) -> Result<Vec<Result<FitResult>>> {
    fit_path_with(dataset, kind, n_lambda, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn fit_path_with(
    dataset: &Dataset,
    kind: PenaltyKind,
    n_lambda: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Result<FitResult>>> {
    if n_lambda < 2 {
        return Err(Error::Config("a lambda path needs at least 2 points".into()));
    }
    let data = PsdhData::new(dataset, true)?;
    let grid = lambda_grid(lambda_max_of(&data), n_lambda);
    let mut warm = vec![0.0; data.p()];
    let mut path = Vec::with_capacity(n_lambda);
    for lambda in grid {
        let spec = PenaltySpec::new(kind, lambda);
        match fit_standardized(&data, &spec, warm.clone(), tol, max_iter) {
            Ok((fit, beta)) => {
                warm = beta;
                path.push(Ok(fit));
            }
            Err(e) => {
                log::warn!("{} fit failed at lambda={lambda}: {e}", kind.name());
                path.push(Err(e));
            }
        }
    }
    Ok(path)
}

/// Entry minimizing `-2 l + df log n`; ties go to the larger lambda.
pub fn select_bic(path: &[FitResult], n: usize) -> Result<FitResult> {
    path.iter()
        .map(|f| (bic(f.log_partial_likelihood, f.df(), n), f))
        .min_by(|(ba, fa), (bb, fb)| ba.total_cmp(bb).then(fb.lambda.total_cmp(&fa.lambda)))
        .map(|(_, f)| f.clone())
        .ok_or_else(|| Error::InvalidInput("empty lambda path".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipcw::weight_matrix;
    use crate::simgen::{generate, ScenarioSpec};

    #[test]
    fn penalty_derivative_examples() {
        let scad = PenaltySpec::new(PenaltyKind::Scad, 0.2);
        assert_eq!(penalty_derivative(&scad, 0.1).unwrap(), 0.2);
        let v = penalty_derivative(&scad, 0.4).unwrap();
        assert!((v - (0.74 - 0.4) / 2.7).abs() < 1e-15);
        assert!((v - 0.125_925_925_925_925_9).abs() < 1e-12);
        let mcp = PenaltySpec::new(PenaltyKind::Mcp, 0.2);
        assert_eq!(penalty_derivative(&mcp, 0.9).unwrap(), 0.0);
        for kind in [PenaltyKind::Lasso, PenaltyKind::Scad, PenaltyKind::Mcp] {
            assert_eq!(penalty_derivative(&PenaltySpec::new(kind, 0.3), 0.0).unwrap(), 0.3);
        }
    }

    #[test]
    fn invalid_a_is_config_error() {
        let bad = PenaltySpec::new(PenaltyKind::Scad, 0.1).with_a(1.5);
        assert!(matches!(penalty_derivative(&bad, 0.1), Err(Error::Config(_))));
        let bad = PenaltySpec::new(PenaltyKind::Mcp, 0.1).with_a(1.0);
        assert!(matches!(penalty_derivative(&bad, 0.1), Err(Error::Config(_))));
        assert!(PenaltySpec::new(PenaltyKind::Lasso, -1.0).validate().is_err());
    }

    #[test]
    fn penalty_value_derivative_consistency() {
        for kind in [PenaltyKind::Lasso, PenaltyKind::Scad, PenaltyKind::Mcp] {
            let spec = PenaltySpec::new(kind, 0.25);
            for k in 1..200 {
                let b = k as f64 * 0.01;
                let h = 1e-6;
                let fd = (spec.value(b + h) - spec.value(b - h)) / (2.0 * h);
                assert!((fd - penalty_derivative(&spec, b).unwrap()).abs() < 1e-6, "{kind:?} at {b}");
            }
        }
    }

    fn small_dataset(seed: u64, n: usize, p: usize) -> Dataset {
        generate(&ScenarioSpec::new(n, p.max(12), seed)).unwrap().subset_covariates(p)
    }

    #[test]
    fn beta_zero_likelihood_is_log_risk_weights() {
        let ds = small_dataset(3, 40, 2);
        let w = weight_matrix(&ds).unwrap();
        let ll = log_partial_likelihood(&[0.0, 0.0], &ds, &w).unwrap();
        let mut expected = 0.0;
        for r in ds.records().iter().filter(|r| r.status == 1) {
            let l = w.time_index(r.time).unwrap();
            let s: f64 = ds
                .records()
                .iter()
                .enumerate()
                .filter(|(_, s)| s.time >= r.time || s.status == 2)
                .map(|(j, _)| w.get(j, l))
                .sum();
            expected -= s.ln();
        }
        assert!((ll - expected).abs() < 1e-10);
    }

    #[test]
    fn dense_and_sorted_likelihoods_agree() {
        let ds = small_dataset(11, 60, 4);
        let w = weight_matrix(&ds).unwrap();
        let data = PsdhData::new(&ds, false).unwrap();
        let beta = [0.4, -0.7, 0.2, 1.1];
        let dense = log_partial_likelihood(&beta, &ds, &w).unwrap();
        let sorted = data.log_likelihood(&data.linear_predictor(&beta));
        assert!((dense - sorted).abs() < 1e-10, "{dense} vs {sorted}");
    }

    #[test]
    fn huge_lambda_gives_zero_vector() {
        let ds = small_dataset(5, 100, 6);
        let lmax = lambda_max(&ds).unwrap();
        let fit = fit(&ds, &PenaltySpec::new(PenaltyKind::Lasso, lmax * 1.01), &[0.0; 6], 1e-6, 100).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert!(fit.selected.is_empty() && fit.converged);
    }

    #[test]
    fn path_starts_empty_and_decreases() {
        let ds = small_dataset(8, 120, 12);
        let path = fit_path(&ds, PenaltyKind::Lasso, 20).unwrap();
        assert_eq!(path.len(), 20);
        let fits: Vec<_> = path.into_iter().map(|r| r.unwrap()).collect();
        assert!(fits[0].selected.is_empty());
        assert!(fits.windows(2).all(|w| w[0].lambda > w[1].lambda));
        assert!(fits.iter().all(|f| f.monotone));
    }

    #[test]
    fn bic_selection_rules() {
        let ds = small_dataset(2, 80, 12);
        let fits: Vec<_> = fit_path(&ds, PenaltyKind::Mcp, 5)
            .unwrap()
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(select_bic(&fits[..1], 80).unwrap(), fits[0]);

        let mut a = fits[1].clone();
        let mut b = fits[1].clone();
        a.lambda = 0.5;
        b.lambda = 0.2;
        b.selected = a.selected.clone();
        assert_eq!(select_bic(&[b.clone(), a.clone()], 80).unwrap().lambda, 0.5);
        assert!(select_bic(&[], 80).is_err());
    }

    #[test]
    fn sign_flip_symmetry() {
        let ds = small_dataset(21, 150, 4);
        let spec = PenaltySpec::new(PenaltyKind::Scad, 0.02);
        let base = fit(&ds, &spec, &[0.0; 4], 1e-8, 1000).unwrap();
        let flipped_rows: Vec<Vec<f64>> = ds
            .records()
            .iter()
            .map(|r| {
                let mut x = r.covariates.clone();
                x[2] = -x[2];
                x
            })
            .collect();
        let flipped = ds
            .with_covariates(flipped_rows, ds.covariate_names().to_vec())
            .unwrap();
        let other = fit(&flipped, &spec, &[0.0; 4], 1e-8, 1000).unwrap();
        for j in 0..4 {
            let expected = if j == 2 { -base.beta[j] } else { base.beta[j] };
            assert!((other.beta[j] - expected).abs() < 1e-6);
        }
    }
}

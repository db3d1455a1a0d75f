//! DeepHit: a discrete-time multitask network for competing risks.
//!
//! Observed times are cut into equal-frequency bins. A shared ReLU trunk feeds
//! one stack per cause, each also seeing the raw covariates, and a single
//! softmax turns the concatenated outputs into a joint pmf over (cause, bin).
//! Training minimizes the log-likelihood loss plus a pairwise ranking loss
//! with Adam on mini-batches.

mod loss;
pub mod net;

use std::io::Write;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::psdh::Standardizer;
use crate::step::StepFunction;

pub use net::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub bins: usize,
    pub shared_layers: Vec<usize>,
    pub cause_layers: Vec<usize>,
    pub alpha: f64,
    pub sigma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            bins: 50,
            shared_layers: vec![128, 128],
            cause_layers: vec![64],
            alpha: 0.1,
            sigma: 0.1,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.bins < 2 {
            return bad("at least two time bins are required");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be nonnegative");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.shared_layers.contains(&0) || self.cause_layers.contains(&0) {
            return bad("layer sizes must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Subjects mapped to time bins `(e_{b-1}, e_b]`, `b = 1..=B`, with `e_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedData {
    /// Upper bin edges, strictly increasing; the last is the largest time.
    pub edges: Vec<f64>,
    /// 1-based bin of each subject.
    pub bins: Vec<usize>,
    pub times: Vec<f64>,
    pub status: Vec<u32>,
    pub n_causes: u32,
}

impl BinnedData {
    pub fn n_bins(&self) -> usize {
        self.edges.len()
    }

    pub fn n(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_of(&self, t: f64) -> usize {
        bin_index(&self.edges, t)
    }
}

fn bin_index(edges: &[f64], t: f64) -> usize {
    (edges.partition_point(|&e| e < t) + 1).min(edges.len())
}

/// Equal-frequency edges at the order statistics `T_(ceil(b n / B))`.
pub fn bin_edges(times: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 1 {
        return Err(Error::InvalidInput("at least one bin is required".into()));
    }
    if times.is_empty() {
        return Err(Error::InvalidInput("no observed times".into()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..=bins).map(|b| sorted[(b * n).div_ceil(bins) - 1]).collect();
    edges.dedup();
    if edges.len() < bins {
        log::warn!("only {} distinct bin edges; using {} bins instead of {bins}", edges.len(), edges.len());
    }
    Ok(edges)
}

pub fn discretize(dataset: &Dataset, bins: usize) -> Result<BinnedData> {
    let times: Vec<f64> = dataset.records().iter().map(|r| r.time).collect();
    let edges = bin_edges(&times, bins)?;
    Ok(BinnedData {
        bins: times.iter().map(|&t| bin_index(&edges, t)).collect(),
        status: dataset.records().iter().map(|r| r.status).collect(),
        times,
        edges,
        n_causes: dataset.n_causes(),
    })
}

/// Joint probability of (cause, bin) for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    pub causes: usize,
    pub bins: usize,
    /// Cause-major: cell `(k, b)` lives at `(k - 1) * bins + (b - 1)`.
    pub values: Vec<f64>,
}

impl JointPmf {
    pub fn new(causes: usize, bins: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != causes * bins || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("pmf must hold causes x bins nonnegative values".into()));
        }
        Ok(Self { causes, bins, values })
    }

    pub fn uniform(causes: usize, bins: usize) -> Self {
        let n = causes * bins;
        Self { causes, bins, values: vec![1.0 / n as f64; n] }
    }

    pub fn get(&self, cause: usize, bin: usize) -> f64 {
        self.values[(cause - 1) * self.bins + bin - 1]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn check(&self, cause: usize, bin: usize) -> Result<()> {
        if !(1..=self.causes).contains(&cause) || !(1..=self.bins).contains(&bin) {
            return Err(Error::InvalidInput(format!("cell ({cause}, {bin}) out of range")));
        }
        Ok(())
    }
}

/// `F_k(b) = sum_{b' <= b} P(b', k)`.
pub fn cif_from_pmf(pmf: &JointPmf, cause: usize, bin: usize) -> Result<f64> {
    pmf.check(cause, bin)?;
    Ok((1..=bin).map(|c| pmf.get(cause, c)).sum())
}

fn stack(pmfs: &[JointPmf], data: &BinnedData) -> Result<Array2<f64>> {
    if pmfs.len() != data.n() {
        return Err(Error::InvalidInput(format!("{} pmfs for {} subjects", pmfs.len(), data.n())));
    }
    let cells = data.n_causes as usize * data.n_bins();
    if pmfs.iter().any(|p| p.values.len() != cells || p.bins != data.n_bins()) {
        return Err(Error::InvalidInput("pmf shape does not match the binning".into()));
    }
    let flat: Vec<f64> = pmfs.iter().flat_map(|p| p.values.iter().copied()).collect();
    Ok(Array2::from_shape_vec((pmfs.len(), cells), flat).expect("shape"))
}

/// Log-likelihood loss. Probabilities are floored at 1e-12 inside the logs.
pub fn loss_l1(pmfs: &[JointPmf], data: &BinnedData) -> Result<f64> {
    let y = stack(pmfs, data)?;
    let rows: Vec<usize> = (0..data.n()).collect();
    Ok(loss::l1(y.view(), &rows, data, None))
}

/// Ranking loss `sum_k alpha sum_{i != j} A_kij exp(-(F_k(b_i|x_i) - F_k(b_i|x_j)) / sigma)`.
pub fn loss_l2(pmfs: &[JointPmf], data: &BinnedData, alpha: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(alpha >= 0.0) {
        return Err(Error::InvalidInput("need alpha >= 0 and sigma > 0".into()));
    }
    let y = stack(pmfs, data)?;
    let rows: Vec<usize> = (0..data.n()).collect();
    Ok(loss::l2(y.view(), &rows, data, alpha, sigma, None))
}

/// `l1_weight * L1 + L2` on the subjects `rows` (indices into both `x` and
/// `data`) and its gradient with respect to every network parameter.
pub fn loss_and_gradient(
    net: &Network,
    x: &Array2<f64>,
    rows: &[usize],
    data: &BinnedData,
    l1_weight: f64,
    alpha: f64,
    sigma: f64,
) -> (f64, Network) {
    let xb = x.select(Axis(0), rows);
    let cache = net.forward_cache(xb.view());
    let mut dy = Array2::zeros(cache.y.raw_dim());
    let mut total = 0.0;
    if l1_weight != 0.0 {
        let mut g = Array2::zeros(cache.y.raw_dim());
        total += l1_weight * loss::l1(cache.y.view(), rows, data, Some(&mut g));
        dy.scaled_add(l1_weight, &g);
    }
    total += loss::l2(cache.y.view(), rows, data, alpha, sigma, Some(&mut dy));
    (total, net.backward(&cache, &dy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepHitModel {
    pub network: Network,
    pub edges: Vec<f64>,
    pub standardizer: Standardizer,
    /// Training loss `L1 + L2` summed over mini-batches, per epoch.
    pub loss_history: Vec<f64>,
}

impl DeepHitModel {
    fn design(&self, rows: &[&[f64]]) -> Result<Array2<f64>> {
        let p = self.network.p;
        let mut x = Array2::zeros((rows.len(), p));
        for (r, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidInput(format!("expected {p} covariates, got {}", row.len())));
            }
            for j in 0..p {
                x[[r, j]] = (row[j] - self.standardizer.mean[j]) / self.standardizer.scale[j];
            }
        }
        Ok(x)
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len()
    }

    pub fn predict_pmfs(&self, rows: &[&[f64]]) -> Result<Vec<JointPmf>> {
        let y = self.network.forward(self.design(rows)?.view());
        Ok(y.rows()
            .into_iter()
            .map(|r| JointPmf { causes: self.network.causes, bins: self.n_bins(), values: r.to_vec() })
            .collect())
    }

    pub fn predict_pmf(&self, x: &[f64]) -> Result<JointPmf> {
        Ok(self.predict_pmfs(&[x])?.remove(0))
    }

    /// CIF of `cause` at `t`, read off the bin containing `t`.
    pub fn cif_at(&self, x: &[f64], cause: usize, t: f64) -> Result<f64> {
        cif_from_pmf(&self.predict_pmf(x)?, cause, bin_index(&self.edges, t))
    }

    /// CIF as a step function: `F_k(b)` from edge `e_{b-1}` on.
    pub fn trajectory(pmf: &JointPmf, edges: &[f64], cause: usize) -> Result<StepFunction> {
        let mut values = Vec::with_capacity(pmf.bins);
        let mut acc = 0.0;
        for b in 1..=pmf.bins {
            acc += pmf.get(cause, b);
            values.push(acc.min(1.0));
        }
        let first = values[0];
        StepFunction::new(edges[..pmf.bins - 1].to_vec(), values[1..].to_vec(), first)
    }

    pub fn predict_cif(&self, x: &[f64], cause: usize) -> Result<StepFunction> {
        Self::trajectory(&self.predict_pmf(x)?, &self.edges, cause)
    }

    /// CSV with columns `subject,cause,bin_upper,cif`, one row per bin edge.
    pub fn write_predictions<W: Write>(&self, writer: W, subjects: &[usize], rows: &[&[f64]]) -> Result<()> {
        let pmfs = self.predict_pmfs(rows)?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["subject", "cause", "bin_upper", "cif"])?;
        for (s, pmf) in subjects.iter().zip(&pmfs) {
            for k in 1..=pmf.causes {
                let mut acc = 0.0;
                for (b, e) in self.edges.iter().enumerate() {
                    acc += pmf.get(k, b + 1);
                    w.write_record([s.to_string(), k.to_string(), e.to_string(), acc.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Covariates of `dataset` centred and scaled by `st`.
pub fn design_matrix(dataset: &Dataset, st: &Standardizer) -> Array2<f64> {
    Array2::from_shape_fn((dataset.n(), dataset.p()), |(i, j)| {
        (dataset.x(i)[j] - st.mean[j]) / st.scale[j]
    })
}

/// Train on every subject of `dataset`.
pub fn fit_network(dataset: &Dataset, config: &NetConfig) -> Result<DeepHitModel> {
    config.validate()?;
    let data = discretize(dataset, config.bins)?;
    let standardizer = Standardizer::fit(dataset);
    let x = design_matrix(dataset, &standardizer);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::new(
        dataset.p(),
        dataset.n_causes() as usize,
        data.n_bins(),
        &config.shared_layers,
        &config.cause_layers,
        &mut rng,
    );
    let mut adam = net::Adam::new(net.n_parameters(), config.learning_rate);
    let mut order: Vec<usize> = (0..dataset.n()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let snapshot = net.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (l, grad) = loss_and_gradient(&net, &x, batch, &data, 1.0, config.alpha, config.sigma);
            if !l.is_finite() {
                return Err(Error::Divergence {
                    message: format!("non-finite loss in epoch {epoch}"),
                    iterate: snapshot.parameters(),
                });
            }
            epoch_loss += l;
            adam.update(&mut net, &grad);
            if !net.is_finite() {
                return Err(Error::Divergence {
                    message: format!("non-finite parameters in epoch {epoch}"),
                    iterate: snapshot.parameters(),
                });
            }
        }
        log::debug!("deephit epoch {epoch}: loss {epoch_loss}");
        loss_history.push(epoch_loss);
    }
    Ok(DeepHitModel { network: net, edges: data.edges, standardizer, loss_history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: DeepHitModel,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Per test subject, the CIF trajectory of each cause.
    pub test_cifs: Vec<Vec<StepFunction>>,
}

/// Random train/test split, fit on the training part, predict the test part.
pub fn train(dataset: &Dataset, config: &NetConfig) -> Result<TrainOutput> {
    config.validate()?;
    if dataset.n() < 20 {
        return Err(Error::InvalidInput(format!("need at least 20 subjects, got {}", dataset.n())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..dataset.n()).collect();
    order.shuffle(&mut rng);
    let n_train = ((dataset.n() as f64 * config.train_fraction).round() as usize).clamp(1, dataset.n() - 1);
    let (train_rows, test_rows) = (order[..n_train].to_vec(), order[n_train..].to_vec());
    let model = fit_network(&dataset.subset(&train_rows), config)?;
    let xs: Vec<&[f64]> = test_rows.iter().map(|&i| dataset.x(i)).collect();
    let test_cifs = model
        .predict_pmfs(&xs)?
        .iter()
        .map(|pmf| {
            (1..=pmf.causes)
                .map(|k| DeepHitModel::trajectory(pmf, &model.edges, k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainOutput { model, train_rows, test_rows, test_cifs })
}

#[cfg(test)]
mod tests;

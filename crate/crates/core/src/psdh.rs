//! Proportional subdistribution hazards (Fine–Gray) partial likelihood for
//! event type 1, in the sorted cumulative-sum form used by the fitters.
//!
//! At a type-1 event time `t`, subject `j` enters the weighted risk set with
//! weight 1 while `T_j >= t`, and with weight `G(t-)/G(T_j-)` after an earlier
//! competing event. Earlier censored subjects and earlier type-1 events drop
//! out. This is `sum_j w_j(t) Y*_j(t) exp(eta_j)` with the IPCW weights of
//! [`crate::ipcw`], evaluated in `O(n)` per pass.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nonparam::censoring_survival;
use crate::step::StepFunction;

/// Column centring and scaling. Constant columns keep scale 1 and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(dataset: &Dataset) -> Self {
        let n = dataset.n() as f64;
        let p = dataset.p();
        let mut mean = vec![0.0; p];
        for r in dataset.records() {
            for (m, v) in mean.iter_mut().zip(&r.covariates) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; p];
        for r in dataset.records() {
            for ((s, v), m) in var.iter_mut().zip(&r.covariates).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let constant: Vec<bool> = var.iter().map(|&v| v <= 1e-24).collect();
        let scale = var
            .iter()
            .zip(&constant)
            .map(|(&v, &c)| if c { 1.0 } else { v.sqrt() })
            .collect();
        Self {
            mean,
            scale,
            constant,
        }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            mean: vec![0.0; p],
            scale: vec![1.0; p],
            constant: vec![false; p],
        }
    }

    /// Coefficients on the standardized scale back to the original scale.
    pub fn to_original(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().zip(&self.scale).map(|(b, s)| b / s).collect()
    }

    pub fn to_standardized(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().zip(&self.scale).map(|(b, s)| b * s).collect()
    }
}

/// Precomputed risk-set structure for the type-1 subdistribution likelihood.
#[derive(Debug, Clone)]
pub struct PsdhData {
    n: usize,
    p: usize,
    /// Row-major covariates (standardized when requested).
    x: Vec<f64>,
    time: Vec<f64>,
    status: Vec<u32>,
    order: Vec<usize>,
    /// Distinct type-1 event times.
    event_times: Vec<f64>,
    event_counts: Vec<usize>,
    g_left: Vec<f64>,
    /// `1 / G(T_j-)` for competing-event subjects, 0 otherwise.
    comp_coef: Vec<f64>,
    /// Sum of covariates over type-1 events.
    event_x_sum: Vec<f64>,
    pub standardizer: Standardizer,
}

impl PsdhData {
    pub fn new(dataset: &Dataset, standardize: bool) -> Result<Self> {
        let n = dataset.n();
        let p = dataset.p();
        if dataset.count_events(1) == 0 {
            return Err(Error::NoEvents { cause: 1 });
        }
        let standardizer = if standardize {
            Standardizer::fit(dataset)
        } else {
            Standardizer::identity(p)
        };
        let mut x = Vec::with_capacity(n * p);
        for r in dataset.records() {
            for ((v, m), s) in r
                .covariates
                .iter()
                .zip(&standardizer.mean)
                .zip(&standardizer.scale)
            {
                x.push((v - m) / s);
            }
        }
        let time: Vec<f64> = dataset.records().iter().map(|r| r.time).collect();
        let status: Vec<u32> = dataset.records().iter().map(|r| r.status).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));

        let g_hat = censoring_survival(dataset);
        let mut event_times: Vec<f64> = (0..n).filter(|&i| status[i] == 1).map(|i| time[i]).collect();
        event_times.sort_by(f64::total_cmp);
        let mut event_counts = Vec::new();
        let mut distinct = Vec::new();
        for t in event_times {
            if distinct.last() == Some(&t) {
                *event_counts.last_mut().unwrap() += 1;
            } else {
                distinct.push(t);
                event_counts.push(1);
            }
        }
        let g_left = distinct.iter().map(|&t| g_hat.eval_left(t)).collect();
        let comp_coef = (0..n)
            .map(|j| {
                if status[j] >= 2 {
                    let g = g_hat.eval_left(time[j]);
                    if g > 0.0 {
                        1.0 / g
                    } else {
                        0.0
                    }
                } else {
                    0.0
                }
            })
            .collect();
        let mut event_x_sum = vec![0.0; p];
        for i in (0..n).filter(|&i| status[i] == 1) {
            for (s, v) in event_x_sum.iter_mut().zip(&x[i * p..(i + 1) * p]) {
                *s += v;
            }
        }
        Ok(Self {
            n,
            p,
            x,
            time,
            status,
            order,
            event_times: distinct,
            event_counts,
            g_left,
            comp_coef,
            event_x_sum,
            standardizer,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn x_ij(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.p + j]
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn n_events(&self) -> usize {
        self.event_counts.iter().sum()
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.x(i).iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect()
    }

    /// For each type-1 event time `t_l`, the weighted risk-set sum of a
    /// per-subject vector of length `dim`. Output is `m x dim`, row-major.
    pub fn risk_sums(&self, dim: usize, per_subject: impl Fn(usize, &mut [f64])) -> Vec<f64> {
        let m = self.event_times.len();
        let mut out = vec![0.0; m * dim];
        let mut buf = vec![0.0; dim];
        let mut acc = vec![0.0; dim];
        let mut ptr = self.n;
        for l in (0..m).rev() {
            let t = self.event_times[l];
            while ptr > 0 && self.time[self.order[ptr - 1]] >= t {
                ptr -= 1;
                per_subject(self.order[ptr], &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
            }
            out[l * dim..(l + 1) * dim].copy_from_slice(&acc);
        }
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut ptr = 0;
        for l in 0..m {
            let t = self.event_times[l];
            while ptr < self.n && self.time[self.order[ptr]] < t {
                let j = self.order[ptr];
                let c = self.comp_coef[j];
                if c > 0.0 {
                    per_subject(j, &mut buf);
                    acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += c * b);
                }
                ptr += 1;
            }
            let g = self.g_left[l];
            out[l * dim..(l + 1) * dim]
                .iter_mut()
                .zip(&acc)
                .for_each(|(o, a)| *o += g * a);
        }
        out
    }

    /// `exp(eta - max(eta))` and the shift.
    pub fn shifted_exp(eta: &[f64]) -> (Vec<f64>, f64) {
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        (eta.iter().map(|e| (e - shift).exp()).collect(), shift)
    }

    /// Log partial likelihood at linear predictor `eta`.
    pub fn log_likelihood(&self, eta: &[f64]) -> f64 {
        let (w, shift) = Self::shifted_exp(eta);
        let s0 = self.risk_sums(1, |j, out| out[0] = w[j]);
        let mut ll: f64 = (0..self.n)
            .filter(|&i| self.status[i] == 1)
            .map(|i| eta[i])
            .sum();
        for (d, s) in self.event_counts.iter().zip(&s0) {
            ll -= *d as f64 * (s.ln() + shift);
        }
        ll
    }

    /// Score and negative second derivative of the log partial likelihood
    /// along covariate `j`, at linear predictor `eta`.
    pub fn coordinate_derivatives(&self, eta_exp: &[f64], j: usize) -> (f64, f64) {
        let sums = self.risk_sums(3, |i, out| {
            let w = eta_exp[i];
            let x = self.x_ij(i, j);
            out[0] = w;
            out[1] = w * x;
            out[2] = w * x * x;
        });
        let mut score = self.event_x_sum[j];
        let mut info = 0.0;
        for (l, &d) in self.event_counts.iter().enumerate() {
            let s = &sums[3 * l..3 * l + 3];
            let mean = s[1] / s[0];
            score -= d as f64 * mean;
            info += d as f64 * (s[2] / s[0] - mean * mean);
        }
        (score, info.max(0.0))
    }

    /// Score vector and information matrix restricted to `coords`.
    pub fn block_derivatives(&self, eta_exp: &[f64], coords: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let q = coords.len();
        let dim = 1 + q + q * q;
        let sums = self.risk_sums(dim, |i, out| {
            let w = eta_exp[i];
            out[0] = w;
            for (a, &ja) in coords.iter().enumerate() {
                let xa = self.x_ij(i, ja);
                out[1 + a] = w * xa;
                for (b, &jb) in coords.iter().enumerate() {
                    out[1 + q + a * q + b] = w * xa * self.x_ij(i, jb);
                }
            }
        });
        let mut score: Vec<f64> = coords.iter().map(|&j| self.event_x_sum[j]).collect();
        let mut info = vec![0.0; q * q];
        for (l, &d) in self.event_counts.iter().enumerate() {
            let s = &sums[dim * l..dim * (l + 1)];
            let d = d as f64;
            for a in 0..q {
                let ma = s[1 + a] / s[0];
                score[a] -= d * ma;
                for b in 0..q {
                    let mb = s[1 + b] / s[0];
                    info[a * q + b] += d * (s[1 + q + a * q + b] / s[0] - ma * mb);
                }
            }
        }
        (score, info)
    }

    /// Breslow estimate of the cumulative baseline subdistribution hazard.
    pub fn breslow_baseline(&self, eta: &[f64]) -> StepFunction {
        let (w, shift) = Self::shifted_exp(eta);
        let s0 = self.risk_sums(1, |j, out| out[0] = w[j]);
        let scale = (-shift).exp();
        let mut h = 0.0;
        let values = self
            .event_counts
            .iter()
            .zip(&s0)
            .map(|(&d, &s)| {
                h += d as f64 / s * scale;
                h
            })
            .collect();
        StepFunction::from_sorted(self.event_times.clone(), values, 0.0)
    }
}

/// A fitted Fine–Gray model for event 1: coefficients on the original
/// covariate scale and the cumulative baseline subdistribution hazard.
#[derive(Debug, Clone)]
pub struct PsdhModel {
    pub beta: Vec<f64>,
    pub baseline: StepFunction,
}

impl PsdhModel {
    /// Refit the Breslow baseline for given original-scale coefficients.
    pub fn from_coefficients(dataset: &Dataset, beta: Vec<f64>) -> Result<Self> {
        let data = PsdhData::new(dataset, false)?;
        let eta = data.linear_predictor(&beta);
        Ok(Self {
            baseline: data.breslow_baseline(&eta),
            beta,
        })
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.beta).map(|(a, b)| a * b).sum()
    }

    /// `F_1(t | x) = 1 - exp(-H_0(t) exp(beta' x))`.
    pub fn predict_cif(&self, x: &[f64]) -> StepFunction {
        let r = self.linear_predictor(x).exp();
        self.baseline.map(|h| 1.0 - (-h * r).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SubjectRecord;

    fn toy() -> Dataset {
        let rows = [
            (1.0, 1, 0.5),
            (1.5, 2, -0.3),
            (2.0, 0, 1.2),
            (2.5, 1, -1.0),
            (3.0, 2, 0.1),
            (3.5, 1, 0.7),
            (4.0, 0, -0.2),
            (5.0, 1, 0.0),
        ];
        Dataset::from_records(
            rows.iter()
                .map(|&(t, s, x)| SubjectRecord::new(t, s, vec![x, x * x]))
                .collect(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let data = PsdhData::new(&toy(), false).unwrap();
        let beta = [0.3, -0.2];
        let eta = data.linear_predictor(&beta);
        let (w, _) = PsdhData::shifted_exp(&eta);
        let h = 1e-5;
        for j in 0..2 {
            let (u, info) = data.coordinate_derivatives(&w, j);
            let ll_at = |d: f64| {
                let mut b = beta;
                b[j] += d;
                data.log_likelihood(&data.linear_predictor(&b))
            };
            let fd_u = (ll_at(h) - ll_at(-h)) / (2.0 * h);
            let fd_i = -(ll_at(h) - 2.0 * ll_at(0.0) + ll_at(-h)) / (h * h);
            assert!((u - fd_u).abs() < 1e-6, "score {u} vs {fd_u}");
            assert!((info - fd_i).abs() < 1e-3, "info {info} vs {fd_i}");
        }
        let (u, info) = data.block_derivatives(&w, &[0, 1]);
        for j in 0..2 {
            let (uj, ij) = data.coordinate_derivatives(&w, j);
            assert!((u[j] - uj).abs() < 1e-12);
            assert!((info[j * 2 + j] - ij).abs() < 1e-12);
        }
        assert!((info[1] - info[2]).abs() < 1e-12);
    }

    #[test]
    fn requires_type_one_events() {
        let ds = Dataset::from_records(vec![SubjectRecord::new(1.0, 2, vec![0.0])], 2).unwrap();
        assert!(matches!(PsdhData::new(&ds, false), Err(Error::NoEvents { cause: 1 })));
    }

    #[test]
    fn standardizer_round_trip() {
        let s = Standardizer::fit(&toy());
        let b = [0.4, -1.1];
        let back = s.to_original(&s.to_standardized(&b));
        assert!((back[0] - b[0]).abs() < 1e-14 && (back[1] - b[1]).abs() < 1e-14);
    }

    #[test]
    fn predicted_cif_is_monotone() {
        let ds = toy();
        let model = PsdhModel::from_coefficients(&ds, vec![0.5, -0.1]).unwrap();
        let f = model.predict_cif(&[1.0, 1.0]);
        assert!(f.is_nondecreasing());
        assert!(f.values().iter().all(|&v| (0.0..1.0).contains(&v)));
    }
}

//! Two-cause Fine–Gray data generator and the simulation scenario grid.
//!
//! Covariates 1–6 are continuous, 7–12 binary (dichotomized latent normals),
//! the rest independent noise. Event 1 follows a proportional subdistribution
//! hazards model with CIF
//! `F_1(t|x) = 1 - [1 - pi (1 - exp(-t))]^{exp(eta_1)}`; given no event 1,
//! the cause-2 time is exponential with rate `exp(eta_2)`. Censoring is
//! uniform on `(0, 20)`.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Open01, StandardNormal};

use crate::data::{default_names, Dataset, SubjectRecord};
use crate::error::{Error, Result};

pub const N_TRUE: usize = 12;
pub const DEFAULT_PI: f64 = 0.5;
pub const DEFAULT_CENSORING_MAX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorType {
    Independent,
    Exchangeable,
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictorModel {
    Linear,
    Quadratic,
    Interaction,
}

impl fmt::Display for CorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorType::Independent => "independent",
            CorType::Exchangeable => "exchangeable",
            CorType::Ar1 => "ar1",
        })
    }
}

impl FromStr for CorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Self::Independent),
            "exchangeable" => Ok(Self::Exchangeable),
            "ar1" => Ok(Self::Ar1),
            other => Err(Error::Config(format!("unknown cortype `{other}`"))),
        }
    }
}

impl fmt::Display for PredictorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictorModel::Linear => "linear",
            PredictorModel::Quadratic => "quadratic",
            PredictorModel::Interaction => "interaction",
        })
    }
}

impl FromStr for PredictorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            "interaction" => Ok(Self::Interaction),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// One cell of the simulation grid plus its replicate seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub cortype: CorType,
    /// Correlation strength; ignored for independent covariates.
    pub r: f64,
    /// Dichotomization threshold for covariates 7–12.
    pub r_b: f64,
    pub model: PredictorModel,
    pub seed: u64,
    /// Baseline cause-1 mixture mass.
    pub pi: f64,
    /// Upper end of the uniform censoring distribution; `None` disables censoring.
    pub censoring_max: Option<f64>,
}

impl ScenarioSpec {
    /// Independent covariates, linear predictor, `r_b = 0`.
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            cortype: CorType::Independent,
            r: 0.0,
            r_b: 0.0,
            model: PredictorModel::Linear,
            seed,
            pi: DEFAULT_PI,
            censoring_max: Some(DEFAULT_CENSORING_MAX),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < N_TRUE {
            return Err(Error::Config(format!("p must be at least {N_TRUE}, got {}", self.p)));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::Config(format!("pi must lie in (0, 1), got {}", self.pi)));
        }
        if self.cortype != CorType::Independent && !(self.r > -0.5 && self.r < 1.0) {
            return Err(Error::Config(format!("correlation r={} is not admissible", self.r)));
        }
        if let Some(c) = self.censoring_max {
            if !(c > 0.0) {
                return Err(Error::Config("censoring bound must be positive".into()));
            }
        }
        Ok(())
    }

    /// `key=value` sidecar describing the cell.
    pub fn metadata_record(&self, cell_id: &str) -> String {
        format!(
            "cell_id={cell_id}\nn={}\np={}\ncortype={}\nr={}\nr_b={}\nmodel={}\nseed={}\npi={}\ncensoring_max={}\n",
            self.n,
            self.p,
            self.cortype,
            self.r,
            self.r_b,
            self.model,
            self.seed,
            self.pi,
            self.censoring_max.map_or("none".to_string(), |c| c.to_string()),
        )
    }
}

/// True coefficients of the generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueEffects {
    pub beta1: [f64; N_TRUE],
    pub beta2: [f64; N_TRUE],
    pub quad1: [f64; 6],
    pub quad2: [f64; 6],
    pub inter1: [f64; 6],
    pub inter2: [f64; 6],
}

impl Default for TrueEffects {
    fn default() -> Self {
        let l = LN_2;
        Self {
            beta1: [l, -l, 0.0, 0.0, l, -l, 1.5, -1.5, 0.0, 0.0, 1.5, -1.5],
            beta2: [0.0, 0.0, l, -l, l, -l, 0.0, 0.0, 1.5, -1.5, 1.5, -1.5],
            quad1: [l, -l, 0.0, 0.0, l, -l],
            quad2: [0.0, 0.0, l, -l, l, -l],
            inter1: [-l, l, 0.0, 0.0, -l, l],
            inter2: [0.0, 0.0, -l, l, -l, l],
        }
    }
}

impl TrueEffects {
    /// Event-1 linear coefficients padded with zeros to length `p`.
    pub fn beta1_padded(&self, p: usize) -> Vec<f64> {
        let mut b = vec![0.0; p];
        b[..N_TRUE].copy_from_slice(&self.beta1);
        b
    }

    /// Indices of the true covariates (0-based).
    pub fn true_set() -> Vec<usize> {
        (0..N_TRUE).collect()
    }
}

fn block_correlation(cortype: CorType, r: f64) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        if i == j {
            1.0
        } else {
            match cortype {
                CorType::Independent => 0.0,
                CorType::Exchangeable => r,
                CorType::Ar1 => r.powi((i as i32 - j as i32).abs()),
            }
        }
    })
}

/// Covariate matrix (rows are subjects).
pub fn gen_covariates<R: Rng>(spec: &ScenarioSpec, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let chol = block_correlation(spec.cortype, spec.r)
        .cholesky()
        .ok_or_else(|| Error::Config(format!("correlation r={} is not positive definite", spec.r)))?
        .l();
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut x = Vec::with_capacity(spec.p);
        // Four blocks of three: two continuous, two latent for the binary columns.
        for block in 0..4 {
            let z = nalgebra::Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let v = chol * z;
            for value in v.iter() {
                if block < 2 {
                    x.push(*value);
                } else {
                    x.push(if *value < spec.r_b { 1.0 } else { 0.0 });
                }
            }
        }
        for _ in N_TRUE..spec.p {
            x.push(rng.sample::<f64, _>(StandardNormal));
        }
        rows.push(x);
    }
    Ok(rows)
}

/// Linear predictor of the requested cause (1 or 2).
pub fn linear_predictor(x: &[f64], model: PredictorModel, effects: &TrueEffects, cause: u32) -> f64 {
    let (beta, quad, inter) = if cause == 1 {
        (&effects.beta1, &effects.quad1, &effects.inter1)
    } else {
        (&effects.beta2, &effects.quad2, &effects.inter2)
    };
    let mut eta: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
    match model {
        PredictorModel::Linear => {}
        PredictorModel::Quadratic => {
            eta += quad.iter().zip(x).map(|(b, v)| b * v * v).sum::<f64>();
        }
        PredictorModel::Interaction => {
            for k in 0..6 {
                if x[k] > 0.0 {
                    eta += inter[k] * x[k + 6];
                }
            }
        }
    }
    eta
}

/// Probability that event 1 ever occurs, `1 - (1 - pi)^{exp(eta_1)}`.
pub fn cause1_probability(eta1: f64, pi: f64) -> f64 {
    1.0 - (1.0 - pi).powf(eta1.exp())
}

/// Analytic `F_1(t | x)`.
pub fn cause1_cif(t: f64, eta1: f64, pi: f64) -> f64 {
    1.0 - (1.0 - pi * (1.0 - (-t).exp())).powf(eta1.exp())
}

/// Observed times and statuses for the covariate rows.
pub fn gen_outcomes<R: Rng>(
    rows: &[Vec<f64>],
    spec: &ScenarioSpec,
    effects: &TrueEffects,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<u32>)> {
    spec.validate()?;
    let censoring = spec
        .censoring_max
        .map(|c| rand_distr::Uniform::new(0.0, c).expect("validated bound"));
    let mut times = Vec::with_capacity(rows.len());
    let mut statuses = Vec::with_capacity(rows.len());
    for x in rows {
        let eta1 = linear_predictor(x, spec.model, effects, 1);
        let eta2 = linear_predictor(x, spec.model, effects, 2);
        let p1 = cause1_probability(eta1, spec.pi);
        let (t, cause) = if rng.random::<f64>() < p1 {
            let u: f64 = rng.sample(Open01);
            let inner = 1.0 - (1.0 - u * p1).powf((-eta1).exp());
            (-(1.0 - inner / spec.pi).ln(), 1)
        } else {
            let exp = Exp::new(eta2.exp())
                .map_err(|e| Error::Numerical(format!("cause-2 rate: {e}")))?;
            (exp.sample(rng), 2)
        };
        let t = t.max(f64::MIN_POSITIVE);
        match &censoring {
            Some(dist) => {
                let c: f64 = dist.sample(rng).max(f64::MIN_POSITIVE);
                if c < t {
                    times.push(c);
                    statuses.push(0);
                } else {
                    times.push(t);
                    statuses.push(cause);
                }
            }
            None => {
                times.push(t);
                statuses.push(cause);
            }
        }
    }
    Ok((times, statuses))
}

/// Generate a dataset; deterministic in `(spec, spec.seed)`.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    generate_with_effects(spec, &TrueEffects::default())
}

pub fn generate_with_effects(spec: &ScenarioSpec, effects: &TrueEffects) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows = gen_covariates(spec, &mut rng)?;
    let (times, statuses) = gen_outcomes(&rows, spec, effects, &mut rng)?;
    let records = rows
        .into_iter()
        .zip(times.into_iter().zip(statuses))
        .map(|(x, (t, s))| SubjectRecord::new(t, s, x))
        .collect();
    Dataset::new(records, 2, default_names(spec.p))
}

/// The full grid: 4 sample sizes x 4 dimensions x 7 correlation settings x
/// 2 binary sparsity levels x 3 predictor models.
pub fn scenario_grid(seed: u64) -> Vec<ScenarioSpec> {
    let mut cells = Vec::new();
    let correlations = [
        (CorType::Independent, 0.0),
        (CorType::Exchangeable, 0.2),
        (CorType::Exchangeable, 0.5),
        (CorType::Exchangeable, 0.8),
        (CorType::Ar1, 0.2),
        (CorType::Ar1, 0.5),
        (CorType::Ar1, 0.8),
    ];
    for n in [200, 300, 500, 1000] {
        for p in [24, 212, 512, 1012] {
            for &(cortype, r) in &correlations {
                for r_b in [0.0, -1.0] {
                    for model in [
                        PredictorModel::Linear,
                        PredictorModel::Quadratic,
                        PredictorModel::Interaction,
                    ] {
                        cells.push(ScenarioSpec {
                            n,
                            p,
                            cortype,
                            r,
                            r_b,
                            model,
                            seed,
                            pi: DEFAULT_PI,
                            censoring_max: Some(DEFAULT_CENSORING_MAX),
                        });
                    }
                }
            }
        }
    }
    cells
}

//! Random forests for competing risks.
//!
//! Trees are grown on bootstrap samples with the log-rank or Gray split rule
//! for a target cause. Leaves hold Aalen–Johansen CIFs, Nelson–Aalen hazards
//! and the event-free survival of their bag members. The ensemble CIF is the
//! pointwise mean of the leaf CIFs.

mod importance;
pub mod split;
mod tree;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::step::StepFunction;

pub use importance::{minimal_depth, select_variables, variable_importance, Importance};
pub use split::{gray_split_stat, logrank_split_stat, modified_risk_count, split_stat, SplitRule};
pub use tree::{NodeEstimates, Split, TreeNode};

pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_MIN_NODE_SIZE: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub mtry: usize,
    /// Minimum number of unique cases in each daughter.
    pub min_node_size: usize,
    pub rule: SplitRule,
    pub cause: u32,
    pub seed: u64,
    pub bootstrap: bool,
    pub horizon: f64,
}

impl ForestConfig {
    pub fn for_dataset(dataset: &Dataset, seed: u64) -> Self {
        Self {
            n_trees: DEFAULT_TREES,
            mtry: ((dataset.p() as f64).sqrt().ceil() as usize).max(1),
            min_node_size: DEFAULT_MIN_NODE_SIZE,
            rule: SplitRule::Gray,
            cause: 1,
            seed,
            bootstrap: true,
            horizon: crate::metrics::DEFAULT_HORIZON,
        }
    }

    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be positive".into()));
        }
        if self.min_node_size == 0 {
            return Err(Error::Config("min_node_size must be positive".into()));
        }
        if self.mtry == 0 || self.mtry > dataset.p().max(1) {
            return Err(Error::Config(format!("mtry {} outside 1..={}", self.mtry, dataset.p())));
        }
        if self.cause == 0 || self.cause > dataset.n_causes() {
            return Err(Error::Config(format!("cause {} outside 1..={}", self.cause, dataset.n_causes())));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config("horizon must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub root: TreeNode,
    /// Bootstrap sample (row indices, with repeats).
    pub bag: Vec<usize>,
    /// Rows never drawn into the bag.
    pub oob: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub config: ForestConfig,
    p: usize,
    n_causes: u32,
}

pub(crate) fn tree_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn grow_tree(dataset: &Dataset, config: &ForestConfig, index: usize) -> Tree {
    let n = dataset.n();
    let mut rng = tree_rng(config.seed, index as u64);
    let bag: Vec<usize> = if config.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut drawn = vec![false; n];
    bag.iter().for_each(|&i| drawn[i] = true);
    let oob = (0..n).filter(|&i| !drawn[i]).collect();
    let root = tree::grow(dataset, bag.clone(), 0, config, dataset.max_time(), &mut rng);
    Tree { root, bag, oob }
}

/// Grow a forest. Trees are independent and built in parallel; each uses its
/// own stream of the seeded generator, so results do not depend on scheduling.
pub fn fit_forest(dataset: &Dataset, config: &ForestConfig) -> Result<Forest> {
    config.validate(dataset)?;
    if dataset.count_events(config.cause) == 0 {
        return Err(Error::NoEvents { cause: config.cause });
    }
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|b| grow_tree(dataset, config, b))
        .collect();
    Ok(Forest { trees, config: config.clone(), p: dataset.p(), n_causes: dataset.n_causes() })
}

impl Forest {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_causes(&self) -> u32 {
        self.n_causes
    }

    fn check(&self, x: &[f64], cause: u32) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::InvalidInput(format!("expected {} covariates, got {}", self.p, x.len())));
        }
        if cause == 0 || cause > self.n_causes {
            return Err(Error::InvalidInput(format!("cause {cause} outside 1..={}", self.n_causes)));
        }
        Ok(())
    }

    /// Ensemble CIF for `cause` at covariate vector `x`.
    pub fn predict_cif(&self, x: &[f64], cause: u32) -> Result<StepFunction> {
        self.check(x, cause)?;
        let leaves: Vec<&StepFunction> = self
            .trees
            .iter()
            .map(|t| &leaf_estimates(&t.root, x).cif[cause as usize - 1])
            .collect();
        StepFunction::mean(&leaves)
    }

    /// Ensemble CIF for `cause` at the configured horizon, used as a risk score.
    pub fn predict_risk(&self, x: &[f64], cause: u32) -> Result<f64> {
        self.check(x, cause)?;
        let total: f64 = self
            .trees
            .iter()
            .map(|t| leaf_estimates(&t.root, x).cif_at_horizon[cause as usize - 1])
            .sum();
        Ok(total / self.trees.len() as f64)
    }

    /// Write one row per tree: index, bag size, OOB size, leaves, depth.
    pub fn write_summary<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tree", "bag", "oob", "leaves", "depth"])?;
        for (b, t) in self.trees.iter().enumerate() {
            w.write_record([
                b.to_string(),
                t.bag.len().to_string(),
                t.oob.len().to_string(),
                t.root.leaves().len().to_string(),
                t.root.max_depth().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn leaf_estimates<'a>(root: &'a TreeNode, x: &[f64]) -> &'a NodeEstimates {
    root.leaf_for(x).estimates.as_ref().expect("leaves carry estimates")
}

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::cindex;

use super::{tree_rng, Forest, TreeNode};

/// Permutation importance. `degenerate` counts trees skipped because their
/// out-of-bag sample had no comparable pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    pub vimp: Vec<f64>,
    pub degenerate: usize,
}

/// Mean over trees of the increase in out-of-bag prediction error
/// `1 - C(t*)` after permuting each covariate among the OOB cases.
/// `dataset` must be the training data of `forest`.
pub fn variable_importance(forest: &Forest, dataset: &Dataset) -> Result<Importance> {
    if dataset.p() != forest.p() {
        return Err(Error::InvalidInput("dataset does not match forest".into()));
    }
    let cfg = &forest.config;
    let (cause, horizon) = (cfg.cause, cfg.horizon);
    let k = cause as usize - 1;
    let p = forest.p();
    let mut sum = vec![0.0; p];
    let mut used = 0usize;
    let mut degenerate = 0usize;
    for (b, tree) in forest.trees.iter().enumerate() {
        let oob = dataset.subset(&tree.oob);
        let risk = |root: &TreeNode, x: &dyn Fn(usize) -> f64| {
            root.leaf_with(x).estimates.as_ref().expect("leaf").cif_at_horizon[k]
        };
        let base: Vec<f64> = (0..oob.n()).map(|i| risk(&tree.root, &|j| oob.x(i)[j])).collect();
        let Some(c0) = cindex(&base, &oob, cause, horizon)? else {
            degenerate += 1;
            continue;
        };
        used += 1;
        let mut rng = tree_rng(cfg.seed ^ 0x5eed_1a9e, b as u64);
        for (j, acc) in sum.iter_mut().enumerate() {
            let mut perm: Vec<usize> = (0..oob.n()).collect();
            perm.shuffle(&mut rng);
            let risks: Vec<f64> = (0..oob.n())
                .map(|i| risk(&tree.root, &|c| if c == j { oob.x(perm[i])[j] } else { oob.x(i)[c] }))
                .collect();
            let cj = cindex(&risks, &oob, cause, horizon)?.unwrap_or(c0);
            *acc += c0 - cj;
        }
    }
    if used > 0 {
        sum.iter_mut().for_each(|v| *v /= used as f64);
    }
    Ok(Importance { vimp: sum, degenerate })
}

/// Average over trees of the depth of the shallowest split on each covariate.
/// A covariate never used in a tree scores that tree's maximum depth plus one.
pub fn minimal_depth(forest: &Forest) -> Vec<f64> {
    let p = forest.p();
    let mut total = vec![0.0; p];
    for tree in &forest.trees {
        let mut first = vec![None::<usize>; p];
        let mut stack = vec![&tree.root];
        while let Some(node) = stack.pop() {
            if let (Some(s), Some(c)) = (&node.split, &node.children) {
                let d = &mut first[s.covariate];
                *d = Some(d.map_or(node.depth, |v| v.min(node.depth)));
                stack.push(&c.0);
                stack.push(&c.1);
            }
        }
        let fallback = tree.root.max_depth() + 1;
        for (t, f) in total.iter_mut().zip(first) {
            *t += f.unwrap_or(fallback) as f64;
        }
    }
    let nt = forest.trees.len().max(1) as f64;
    total.iter().map(|t| t / nt).collect()
}

/// Covariates with positive importance and minimal depth no greater than the
/// mean minimal depth.
pub fn select_variables(vimp: &[f64], depths: &[f64]) -> Vec<usize> {
    if depths.is_empty() {
        return Vec::new();
    }
    let threshold = depths.iter().sum::<f64>() / depths.len() as f64;
    (0..vimp.len().min(depths.len()))
        .filter(|&j| vimp[j] > 0.0 && depths[j] <= threshold)
        .collect()
}

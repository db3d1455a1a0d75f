use rand::seq::index::sample;
use rand::Rng;

use crate::data::Dataset;
use crate::nonparam::EventTable;
use crate::step::StepFunction;

use super::split::{cause_event_grid, in_risk_set, statistic};
use super::ForestConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub covariate: usize,
    pub cutpoint: f64,
}

/// Nonparametric estimates over a leaf's members.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEstimates {
    pub survival: StepFunction,
    /// Aalen–Johansen CIF per cause (index `k - 1`).
    pub cif: Vec<StepFunction>,
    /// Nelson–Aalen cumulative cause-specific hazard per cause.
    pub cumulative_hazard: Vec<StepFunction>,
    /// `cif[k - 1]` evaluated at the forest horizon.
    pub cif_at_horizon: Vec<f64>,
}

impl NodeEstimates {
    pub fn from_members(dataset: &Dataset, members: &[usize], horizon: f64) -> Self {
        let table = EventTable::from_outcomes(
            members.iter().map(|&i| (dataset.time(i), dataset.status(i))),
            dataset.n_causes(),
        );
        let causes = 1..=dataset.n_causes();
        let cif: Vec<StepFunction> = causes.clone().map(|k| table.aalen_johansen(k)).collect();
        Self {
            survival: table.km(),
            cif_at_horizon: cif.iter().map(|f| f.eval(horizon)).collect(),
            cumulative_hazard: causes.map(|k| table.nelson_aalen(k)).collect(),
            cif,
        }
    }
}

/// A node of a competing-risk tree. Left daughters hold `x_j <= c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub split: Option<Split>,
    pub children: Option<Box<(TreeNode, TreeNode)>>,
    /// Present on leaves only.
    pub estimates: Option<NodeEstimates>,
    /// Row indices of the bag reaching this node (bootstrap duplicates kept).
    pub members: Vec<usize>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn leaf_for(&self, x: &[f64]) -> &TreeNode {
        self.leaf_with(|j| x[j])
    }

    /// Route with an arbitrary covariate lookup.
    pub fn leaf_with(&self, x: impl Fn(usize) -> f64) -> &TreeNode {
        let mut node = self;
        while let (Some(split), Some(children)) = (&node.split, &node.children) {
            node = if x(split.covariate) <= split.cutpoint {
                &children.0
            } else {
                &children.1
            };
        }
        node
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match &node.children {
                Some(c) => {
                    stack.push(&c.1);
                    stack.push(&c.0);
                }
                None => out.push(node),
            }
        }
        out
    }

    pub fn max_depth(&self) -> usize {
        self.leaves().iter().map(|l| l.depth).max().unwrap_or(0)
    }
}

fn unique_count(members: &[usize], seen: &mut [u32]) -> usize {
    let mut count = 0;
    for &i in members {
        if seen[i] == 0 {
            count += 1;
        }
        seen[i] += 1;
    }
    for &i in members {
        seen[i] = 0;
    }
    count
}

/// Best admissible split over the candidate covariates by exhaustive midpoint
/// scan. Ties keep the lower covariate index, then the lower cutpoint.
pub(crate) fn best_split(
    dataset: &Dataset,
    members: &[usize],
    candidates: &[usize],
    config: &ForestConfig,
    tau: f64,
) -> Option<(Split, f64)> {
    let cause = config.cause;
    let grid = cause_event_grid(dataset, members, cause);
    let m = grid.len();
    if m == 0 {
        return None;
    }
    // Each member is in the risk set on a prefix of the grid of length `reach`.
    let reach: Vec<usize> = members
        .iter()
        .map(|&i| {
            let (t, s) = (dataset.time(i), dataset.status(i));
            grid.iter()
                .take_while(|&&u| in_risk_set(t, s, cause, u, config.rule, tau))
                .count()
        })
        .collect();
    let event_slot: Vec<Option<usize>> = members
        .iter()
        .map(|&i| {
            (dataset.status(i) == cause)
                .then(|| grid.partition_point(|&u| u < dataset.time(i)))
        })
        .collect();
    let mut y = vec![0u32; m];
    let mut d = vec![0u32; m];
    for (r, e) in reach.iter().zip(&event_slot) {
        y[..*r].iter_mut().for_each(|v| *v += 1);
        if let Some(l) = e {
            d[*l] += 1;
        }
    }

    let n = dataset.n();
    let mut copies = vec![0u32; n];
    for &i in members {
        copies[i] += 1;
    }
    let total_unique = copies.iter().filter(|&&c| c > 0).count();
    let mut copies_left = vec![0u32; n];
    let mut best: Option<(Split, f64)> = None;

    let mut sorted_candidates = candidates.to_vec();
    sorted_candidates.sort_unstable();
    for &j in &sorted_candidates {
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by(|&a, &b| dataset.x(members[a])[j].total_cmp(&dataset.x(members[b])[j]));
        let value = |pos: usize| dataset.x(members[order[pos]])[j];
        if value(0) == value(order.len() - 1) {
            continue;
        }
        let mut y_left = vec![0u32; m];
        let mut d_left = vec![0u32; m];
        let mut unique_left = 0usize;
        let mut fully_left = 0usize;
        let mut pos = 0;
        while pos < order.len() {
            let v = value(pos);
            while pos < order.len() && value(pos) == v {
                let a = order[pos];
                let i = members[a];
                y_left[..reach[a]].iter_mut().for_each(|c| *c += 1);
                if let Some(l) = event_slot[a] {
                    d_left[l] += 1;
                }
                if copies_left[i] == 0 {
                    unique_left += 1;
                }
                copies_left[i] += 1;
                if copies_left[i] == copies[i] {
                    fully_left += 1;
                }
                pos += 1;
            }
            if pos == order.len() {
                break;
            }
            let unique_right = total_unique - fully_left;
            if unique_left < config.min_node_size || unique_right < config.min_node_size {
                continue;
            }
            let stat = statistic(&d, &d_left, &y, &y_left).abs();
            if stat > best.map_or(0.0, |b| b.1) {
                let cutpoint = 0.5 * (v + value(pos));
                best = Some((Split { covariate: j, cutpoint }, stat));
            }
        }
        for &i in members {
            copies_left[i] = 0;
        }
    }
    best
}

pub(crate) fn grow<R: Rng>(
    dataset: &Dataset,
    members: Vec<usize>,
    depth: usize,
    config: &ForestConfig,
    tau: f64,
    rng: &mut R,
) -> TreeNode {
    let p = dataset.p();
    let mut seen = vec![0u32; dataset.n()];
    let unique = unique_count(&members, &mut seen);
    let split = if p > 0 && unique >= 2 * config.min_node_size {
        let mtry = config.mtry.clamp(1, p);
        let candidates = sample(rng, p, mtry).into_vec();
        best_split(dataset, &members, &candidates, config, tau)
    } else {
        None
    };
    match split {
        Some((split, _)) => {
            let (left, right): (Vec<usize>, Vec<usize>) = members
                .iter()
                .partition(|&&i| dataset.x(i)[split.covariate] <= split.cutpoint);
            let l = grow(dataset, left, depth + 1, config, tau, rng);
            let r = grow(dataset, right, depth + 1, config, tau, rng);
            TreeNode {
                split: Some(split),
                children: Some(Box::new((l, r))),
                estimates: None,
                members,
                depth,
            }
        }
        None => TreeNode {
            split: None,
            children: None,
            estimates: Some(NodeEstimates::from_members(dataset, &members, config.horizon)),
            members,
            depth,
        },
    }
}

//! Grid configuration files.
//!
//! ```text
//! # global settings
//! methods = lasso, coxboost, rforest
//! trees = 100
//!
//! cell small-independent
//! n = 300
//! p = 24
//! cortype = independent
//! model = linear
//! replicates = 10
//! seed = 1
//! ```
//!
//! Lines before the first `cell` header are global; every later `key = value`
//! line belongs to the most recent cell. `#` starts a comment.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use cmprisk::forest::SplitRule;
use cmprisk::simgen::{CorType, PredictorModel, ScenarioSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Lasso,
    Scad,
    Mcp,
    CoxBoost,
    RForest,
    DeepHit,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Lasso,
        Method::Scad,
        Method::Mcp,
        Method::CoxBoost,
        Method::RForest,
        Method::DeepHit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::Scad => "scad",
            Method::Mcp => "mcp",
            Method::CoxBoost => "coxboost",
            Method::RForest => "rforest",
            Method::DeepHit => "deephit",
        }
    }

    pub fn is_penalized(self) -> bool {
        matches!(self, Method::Lasso | Method::Scad | Method::Mcp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| anyhow!("unknown method `{s}` (expected one of lasso, scad, mcp, coxboost, rforest, deephit)"))
    }
}

/// Tuning shared by every cell of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOptions {
    pub horizon: f64,
    pub train_fraction: f64,
    pub path_len: usize,
    pub boost_steps: usize,
    pub cv_folds: usize,
    pub trees: usize,
    pub min_node_size: usize,
    pub split_rule: SplitRule,
    pub deephit_epochs: usize,
    pub deephit_bins: usize,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            horizon: cmprisk::metrics::DEFAULT_HORIZON,
            train_fraction: 0.8,
            path_len: cmprisk::finegray::DEFAULT_PATH_LEN,
            boost_steps: cmprisk::coxboost::DEFAULT_STEPS,
            cv_folds: 10,
            trees: cmprisk::forest::DEFAULT_TREES,
            min_node_size: cmprisk::forest::DEFAULT_MIN_NODE_SIZE,
            split_rule: SplitRule::Gray,
            deephit_epochs: 200,
            deephit_bins: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    /// Generator settings; `spec.seed` is the base seed of the cell.
    pub spec: ScenarioSpec,
    pub replicates: usize,
}

impl Cell {
    /// Replicate `r` uses seed `base + r`.
    pub fn replicate_spec(&self, r: usize) -> ScenarioSpec {
        ScenarioSpec { seed: self.spec.seed.wrapping_add(r as u64), ..self.spec.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub methods: Vec<Method>,
    pub cells: Vec<Cell>,
    pub options: MethodOptions,
}

impl GridConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut methods = None;
        let mut options = MethodOptions::default();
        let mut cells: Vec<(usize, Cell, Vec<&'static str>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |e: anyhow::Error| e.context(format!("line {lineno}: `{}`", raw.trim()));
            if let Some(rest) = line.strip_prefix("cell").filter(|r| r.is_empty() || r.starts_with(char::is_whitespace)) {
                let id = match rest.trim() {
                    "" => format!("cell{}", cells.len() + 1),
                    name => name.to_string(),
                };
                let spec = ScenarioSpec { seed: 1, ..ScenarioSpec::new(0, 0, 1) };
                cells.push((lineno, Cell { id, spec, replicates: 1 }, Vec::new()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| at(anyhow!("expected `key = value` or a `cell` header")))?;
            match cells.last_mut() {
                None => set_global(key, value, &mut methods, &mut options).map_err(at)?,
                Some((_, cell, seen)) => set_cell(key, value, cell, seen).map_err(at)?,
            }
        }
        let methods = methods.ok_or_else(|| anyhow!("missing `methods` list"))?;
        if cells.is_empty() {
            bail!("no `cell` blocks");
        }
        let mut ids = std::collections::HashSet::new();
        let cells = cells
            .into_iter()
            .map(|(lineno, cell, seen)| {
                for required in ["n", "p"] {
                    if !seen.contains(&required) {
                        bail!("cell `{}` starting at line {lineno} is missing `{required}`", cell.id);
                    }
                }
                if !ids.insert(cell.id.clone()) {
                    bail!("duplicate cell id `{}` at line {lineno}", cell.id);
                }
                cell.spec.validate().map_err(|e| anyhow!("cell `{}` at line {lineno}: {e}", cell.id))?;
                Ok(cell)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { methods, cells, options })
    }

    /// Number of result rows the grid produces.
    pub fn n_tasks(&self) -> usize {
        self.cells.iter().map(|c| c.replicates).sum::<usize>() * self.methods.len()
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| anyhow!("invalid value `{value}`: {e}"))
}

fn set_global(key: &str, value: &str, methods: &mut Option<Vec<Method>>, o: &mut MethodOptions) -> Result<()> {
    match key {
        "methods" => {
            let list = value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(Method::from_str)
                .collect::<Result<Vec<_>>>()?;
            if list.is_empty() {
                bail!("`methods` is empty");
            }
            let mut dedup = list.clone();
            dedup.sort();
            dedup.dedup();
            if dedup.len() != list.len() {
                bail!("`methods` lists a method twice");
            }
            *methods = Some(list);
        }
        "horizon" => o.horizon = parse(value)?,
        "train_fraction" => o.train_fraction = parse(value)?,
        "path_len" => o.path_len = parse(value)?,
        "boost_steps" => o.boost_steps = parse(value)?,
        "cv_folds" => o.cv_folds = parse(value)?,
        "trees" => o.trees = parse(value)?,
        "min_node_size" => o.min_node_size = parse(value)?,
        "split_rule" => o.split_rule = parse(value)?,
        "deephit_epochs" => o.deephit_epochs = parse(value)?,
        "deephit_bins" => o.deephit_bins = parse(value)?,
        other => bail!("unknown setting `{other}`"),
    }
    if !(o.horizon > 0.0 && o.horizon.is_finite()) {
        bail!("horizon must be positive");
    }
    if !(o.train_fraction > 0.0 && o.train_fraction < 1.0) {
        bail!("train_fraction must lie in (0, 1)");
    }
    Ok(())
}

fn set_cell(key: &str, value: &str, cell: &mut Cell, seen: &mut Vec<&'static str>) -> Result<()> {
    const KEYS: [&str; 8] = ["n", "p", "cortype", "r", "r_b", "model", "replicates", "seed"];
    let Some(&k) = KEYS.iter().find(|&&k| k == key) else {
        bail!("unknown cell key `{key}`");
    };
    if seen.contains(&k) {
        bail!("`{key}` given twice in cell `{}`", cell.id);
    }
    seen.push(k);
    let s = &mut cell.spec;
    match k {
        "n" => s.n = parse(value)?,
        "p" => s.p = parse(value)?,
        "cortype" => s.cortype = parse(value)?,
        "r" => s.r = parse(value)?,
        "r_b" => s.r_b = parse(value)?,
        "model" => s.model = parse::<PredictorModel>(value)?,
        "replicates" => {
            cell.replicates = parse(value)?;
            if cell.replicates == 0 {
                bail!("replicates must be positive");
            }
        }
        "seed" => s.seed = parse(value)?,
        _ => unreachable!(),
    }
    if s.cortype == CorType::Independent {
        s.r = 0.0;
    }
    Ok(())
}

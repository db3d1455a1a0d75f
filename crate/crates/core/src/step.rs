//! Right-continuous piecewise-constant functions of time.

use std::io::Write;

use crate::error::{Error, Result};

/// A right-continuous step function.
///
/// `eval(t)` returns the value attached to the largest jump time `<= t`, or
/// `value_before_first` when `t` precedes every jump.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    value_before_first: f64,
}

impl StepFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>, value_before_first: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "step function has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "step function jump times must be positive and finite, got {t}"
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "step function jump times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            times,
            values,
            value_before_first,
        })
    }

    /// Builder for callers that already guarantee the invariants.
    pub(crate) fn from_sorted(times: Vec<f64>, values: Vec<f64>, value_before_first: f64) -> Self {
        debug_assert_eq!(times.len(), values.len());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self {
            times,
            values,
            value_before_first,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            value_before_first: value,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_before_first(&self) -> f64 {
        self.value_before_first
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            self.value_before_first
        } else {
            self.values[idx - 1]
        }
    }

    /// Left limit `f(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s < t);
        if idx == 0 {
            self.value_before_first
        } else {
            self.values[idx - 1]
        }
    }

    /// Jump sizes at each jump time.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = self.value_before_first;
        self.values
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            value_before_first: f(self.value_before_first),
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        let mut prev = self.value_before_first;
        self.values.iter().all(|&v| {
            let ok = v >= prev;
            prev = v;
            ok
        })
    }

    pub fn is_nonincreasing(&self) -> bool {
        let mut prev = self.value_before_first;
        self.values.iter().all(|&v| {
            let ok = v <= prev;
            prev = v;
            ok
        })
    }

    /// Re-express the function on a superset of its jump times.
    pub fn on_grid(&self, grid: &[f64]) -> Self {
        Self::from_sorted(
            grid.to_vec(),
            grid.iter().map(|&t| self.eval(t)).collect(),
            self.value_before_first,
        )
    }

    /// Pointwise mean of several step functions on the union of their jump times.
    pub fn mean(functions: &[&StepFunction]) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidInput("mean of zero step functions".into()));
        }
        let grid = union_times(functions.iter().copied());
        let m = functions.len() as f64;
        let mut values = vec![0.0; grid.len()];
        let mut before = 0.0;
        for f in functions {
            before += f.value_before_first;
            // Both sequences are sorted, so a merge walk evaluates in linear time.
            let mut j = 0;
            let mut current = f.value_before_first;
            for (slot, &t) in values.iter_mut().zip(&grid) {
                while j < f.times.len() && f.times[j] <= t {
                    current = f.values[j];
                    j += 1;
                }
                *slot += current;
            }
        }
        values.iter_mut().for_each(|v| *v /= m);
        Ok(Self::from_sorted(grid, values, before / m))
    }

    /// Two-column `time,value` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "value"])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sorted union of the jump times of several step functions.
pub fn union_times<'a>(functions: impl IntoIterator<Item = &'a StepFunction>) -> Vec<f64> {
    let mut grid: Vec<f64> = functions
        .into_iter()
        .flat_map(|f| f.times.iter().copied())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

//! Group results and summarize each metric by its mean and Monte Carlo
//! standard error.

use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{bail, Result};

use crate::results::{ResultRow, Status, COLUMNS, METRICS};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; `None` for a single value.
    pub se: Option<f64>,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let m = values.len();
        if m == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let se = (m > 1).then(|| {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        });
        Some(Self { count: m, mean, se })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub key: Vec<String>,
    /// Successful rows in the group.
    pub rows: usize,
    /// In `METRICS` order.
    pub metrics: Vec<Option<MetricSummary>>,
}

/// Summaries keyed by the values of `by`, sorted by key. Failed rows are
/// skipped; groups with no successful row are omitted.
pub fn aggregate(rows: &[ResultRow], by: &[&str]) -> Result<Vec<GroupSummary>> {
    for key in by {
        if !COLUMNS.contains(key) || METRICS.contains(key) || *key == "wall_seconds" {
            bail!("cannot group by `{key}`");
        }
    }
    let mut groups: BTreeMap<Vec<String>, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.status == Status::Success) {
        let key = by.iter().map(|c| row.field(c).expect("checked column")).collect();
        groups.entry(key).or_default().push(row);
    }
    Ok(groups
        .into_iter()
        .map(|(key, members)| GroupSummary {
            key,
            rows: members.len(),
            metrics: METRICS
                .iter()
                .map(|m| MetricSummary::of(&members.iter().filter_map(|r| r.metric(m)).collect::<Vec<_>>()))
                .collect(),
        })
        .collect())
}

/// `by..., rows, <metric>_mean, <metric>_se...`.
pub fn write_summary<W: Write>(writer: W, by: &[&str], groups: &[GroupSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = by.iter().map(|s| s.to_string()).collect();
    header.push("rows".into());
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_se"));
    }
    w.write_record(&header)?;
    for g in groups {
        let mut rec = g.key.clone();
        rec.push(g.rows.to_string());
        for s in &g.metrics {
            rec.push(s.as_ref().map(|s| s.mean.to_string()).unwrap_or_default());
            rec.push(s.as_ref().and_then(|s| s.se).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let s = MetricSummary::of(&[0.4, 0.6]).unwrap();
        assert!((s.mean - 0.5).abs() < 1e-15);
        assert!((s.se.unwrap() - 0.1).abs() < 1e-15);
        let one = MetricSummary::of(&[0.3]).unwrap();
        assert_eq!((one.mean, one.se), (0.3, None));
        assert!(MetricSummary::of(&[]).is_none());
    }
}

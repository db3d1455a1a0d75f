//! Competing-risk two-sample split statistics.
//!
//! Both rules share the log-rank score form
//! `L = sum_l (d_le - d * Y_le / Y) / sqrt(sum_l d (Y_le/Y)(1 - Y_le/Y)(Y - d)/(Y - 1))`
//! over the node's distinct type-`k` event times. The Gray rule replaces the
//! risk counts with the modified risk set that keeps subjects who had a
//! competing event, using the largest observed time `tau` as their potential
//! censoring time.

use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitRule {
    LogRank,
    Gray,
}

impl std::str::FromStr for SplitRule {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "logrank" => Ok(Self::LogRank),
            "gray" => Ok(Self::Gray),
            other => Err(crate::error::Error::Config(format!("unknown split rule `{other}`"))),
        }
    }
}

/// Whether a subject counts in the rule's risk set at time `u`.
pub(crate) fn in_risk_set(time: f64, status: u32, cause: u32, u: f64, rule: SplitRule, tau: f64) -> bool {
    if time >= u {
        return true;
    }
    rule == SplitRule::Gray && status != 0 && status != cause && tau > u
}

/// Statistic from per-time counts. Times with `d = 0` contribute nothing.
pub(crate) fn statistic(d: &[u32], d_left: &[u32], y: &[u32], y_left: &[u32]) -> f64 {
    let mut num = 0.0;
    let mut var = 0.0;
    for l in 0..d.len() {
        let (dl, yl) = (d[l] as f64, y[l] as f64);
        if dl == 0.0 || yl == 0.0 {
            continue;
        }
        let frac = y_left[l] as f64 / yl;
        num += d_left[l] as f64 - dl * frac;
        if yl > 1.0 {
            var += dl * frac * (1.0 - frac) * (yl - dl) / (yl - 1.0);
        }
    }
    if var > 0.0 {
        num / var.sqrt()
    } else {
        0.0
    }
}

/// Sorted distinct type-`cause` event times among `members`.
pub(crate) fn cause_event_grid(dataset: &Dataset, members: &[usize], cause: u32) -> Vec<f64> {
    let mut grid: Vec<f64> = members
        .iter()
        .filter(|&&i| dataset.status(i) == cause)
        .map(|&i| dataset.time(i))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn direct_statistic(
    dataset: &Dataset,
    members: &[usize],
    cause: u32,
    covariate: usize,
    cutpoint: f64,
    rule: SplitRule,
    tau: f64,
) -> f64 {
    let grid = cause_event_grid(dataset, members, cause);
    let m = grid.len();
    let (mut d, mut d_left, mut y, mut y_left) = (vec![0; m], vec![0; m], vec![0; m], vec![0; m]);
    for &i in members {
        let (t, s) = (dataset.time(i), dataset.status(i));
        let left = dataset.x(i)[covariate] <= cutpoint;
        for (l, &u) in grid.iter().enumerate() {
            if in_risk_set(t, s, cause, u, rule, tau) {
                y[l] += 1;
                y_left[l] += left as u32;
            }
            if s == cause && t == u {
                d[l] += 1;
                d_left[l] += left as u32;
            }
        }
    }
    statistic(&d, &d_left, &y, &y_left)
}

/// Log-rank split statistic for cause `cause` comparing `x_j <= c` with `x_j > c`.
pub fn logrank_split_stat(dataset: &Dataset, members: &[usize], cause: u32, covariate: usize, cutpoint: f64) -> f64 {
    direct_statistic(dataset, members, cause, covariate, cutpoint, SplitRule::LogRank, f64::INFINITY)
}

/// Gray split statistic; `tau` is the largest observed time of the learning data.
pub fn gray_split_stat(
    dataset: &Dataset,
    members: &[usize],
    cause: u32,
    covariate: usize,
    cutpoint: f64,
    tau: f64,
) -> f64 {
    direct_statistic(dataset, members, cause, covariate, cutpoint, SplitRule::Gray, tau)
}

pub fn split_stat(
    dataset: &Dataset,
    members: &[usize],
    cause: u32,
    covariate: usize,
    cutpoint: f64,
    rule: SplitRule,
    tau: f64,
) -> f64 {
    direct_statistic(dataset, members, cause, covariate, cutpoint, rule, tau)
}

/// Modified risk-set count `Y*_k(u)` over `members`.
pub fn modified_risk_count(dataset: &Dataset, members: &[usize], cause: u32, u: f64, tau: f64) -> usize {
    members
        .iter()
        .filter(|&&i| in_risk_set(dataset.time(i), dataset.status(i), cause, u, SplitRule::Gray, tau))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SubjectRecord;

    fn ds(rows: &[(f64, u32, f64)], k: u32) -> Dataset {
        Dataset::from_records(
            rows.iter().map(|&(t, s, x)| SubjectRecord::new(t, s, vec![x])).collect(),
            k,
        )
        .unwrap()
    }

    #[test]
    fn identical_daughters_give_zero() {
        let d = ds(
            &[(1.0, 1, 0.0), (1.0, 1, 1.0), (2.0, 0, 0.0), (2.0, 0, 1.0), (3.0, 2, 0.0), (3.0, 2, 1.0)],
            2,
        );
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(logrank_split_stat(&d, &all, 1, 0, 0.5), 0.0);
        assert_eq!(gray_split_stat(&d, &all, 1, 0, 0.5, 3.0), 0.0);
    }

    #[test]
    fn no_cause_events_gives_zero() {
        let d = ds(&[(1.0, 2, 0.0), (2.0, 0, 1.0)], 2);
        assert_eq!(logrank_split_stat(&d, &[0, 1], 1, 0, 0.5), 0.0);
    }

    #[test]
    fn modified_risk_set_adds_prior_competing_events() {
        // Competing events at 1 and 2 precede u = 4; censoring at 3 does not count.
        let rows: Vec<(f64, u32, f64)> = vec![
            (1.0, 2, 0.0),
            (2.0, 2, 0.0),
            (3.0, 0, 0.0),
            (4.0, 1, 0.0),
            (5.0, 1, 0.0),
            (5.5, 2, 0.0),
            (6.0, 0, 0.0),
            (7.0, 1, 0.0),
            (8.0, 2, 0.0),
            (9.0, 0, 0.0),
            (10.0, 1, 0.0),
            (12.0, 0, 0.0),
        ];
        let d = ds(&rows, 2);
        let all: Vec<usize> = (0..12).collect();
        let y = d.risk_set(4.0).len();
        assert_eq!(modified_risk_count(&d, &all, 1, 4.0, d.max_time()), y + 2);
        assert_eq!(modified_risk_count(&d, &all, 1, 7.0, d.max_time()), d.risk_set(7.0).len() + 3);
    }
}

//! Nonparametric competing-risk estimators and the transforms between
//! cause-specific and subdistribution quantities.
//!
//! All estimators return [`StepFunction`]s jumping at the distinct observed
//! event times (censoring times for the censoring distribution). A censored
//! subject tied with an event time is counted in that time's risk set.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::step::{union_times, StepFunction};

/// Tie-aware event counts over the distinct event times of a sample.
#[derive(Debug, Clone)]
pub struct EventTable {
    pub times: Vec<f64>,
    /// `events[k-1][l]` = number of type-`k` events at `times[l]`.
    pub events: Vec<Vec<usize>>,
    pub total_events: Vec<usize>,
    pub at_risk: Vec<usize>,
}

impl EventTable {
    /// Build from `(time, status)` pairs.
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = (f64, u32)>, n_causes: u32) -> Self {
        let mut obs: Vec<(f64, u32)> = outcomes.into_iter().collect();
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let k = n_causes as usize;
        let mut table = EventTable {
            times: Vec::new(),
            events: vec![Vec::new(); k],
            total_events: Vec::new(),
            at_risk: Vec::new(),
        };
        let n = obs.len();
        let mut i = 0;
        while i < n {
            let t = obs[i].0;
            let mut j = i;
            let mut counts = vec![0usize; k];
            while j < n && obs[j].0 == t {
                if obs[j].1 >= 1 {
                    counts[obs[j].1 as usize - 1] += 1;
                }
                j += 1;
            }
            let d: usize = counts.iter().sum();
            if d > 0 {
                table.times.push(t);
                for (c, col) in counts.into_iter().zip(table.events.iter_mut()) {
                    col.push(c);
                }
                table.total_events.push(d);
                table.at_risk.push(n - i);
            }
            i = j;
        }
        table
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        Self::from_outcomes(
            dataset.records().iter().map(|r| (r.time, r.status)),
            dataset.n_causes(),
        )
    }

    pub fn n_causes(&self) -> u32 {
        self.events.len() as u32
    }

    /// Event-free survival `S(t_l)` after each distinct event time.
    pub fn survival_values(&self) -> Vec<f64> {
        let mut s = 1.0;
        self.total_events
            .iter()
            .zip(&self.at_risk)
            .map(|(&d, &y)| {
                s *= 1.0 - d as f64 / y as f64;
                s
            })
            .collect()
    }

    pub fn km(&self) -> StepFunction {
        StepFunction::from_sorted(self.times.clone(), self.survival_values(), 1.0)
    }

    pub fn aalen_johansen(&self, cause: u32) -> StepFunction {
        let dk = &self.events[cause as usize - 1];
        let mut s_prev = 1.0;
        let mut f = 0.0;
        let values = (0..self.times.len())
            .map(|l| {
                let y = self.at_risk[l] as f64;
                f += s_prev * dk[l] as f64 / y;
                s_prev *= 1.0 - self.total_events[l] as f64 / y;
                f
            })
            .collect();
        StepFunction::from_sorted(self.times.clone(), values, 0.0)
    }

    pub fn nelson_aalen(&self, cause: u32) -> StepFunction {
        let dk = &self.events[cause as usize - 1];
        let mut h = 0.0;
        let values = (0..self.times.len())
            .map(|l| {
                h += dk[l] as f64 / self.at_risk[l] as f64;
                h
            })
            .collect();
        StepFunction::from_sorted(self.times.clone(), values, 0.0)
    }
}

fn check_cause(dataset: &Dataset, cause: u32) -> Result<()> {
    if cause == 0 || cause > dataset.n_causes() {
        return Err(Error::InvalidInput(format!(
            "event type {cause} outside 1..={}",
            dataset.n_causes()
        )));
    }
    Ok(())
}

/// Kaplan–Meier estimate of event-free survival (any event type counts).
pub fn km_event_free_survival(dataset: &Dataset) -> StepFunction {
    EventTable::from_dataset(dataset).km()
}

/// Reverse Kaplan–Meier estimate of the censoring survival `G(t) = P(C > t)`.
///
/// At tied times events are taken to precede censorings, so subjects with an
/// event at `t` leave the censoring risk set before `t`'s censorings are counted.
pub fn censoring_survival(dataset: &Dataset) -> StepFunction {
    censoring_survival_from(dataset.records().iter().map(|r| (r.time, r.status)))
}

pub(crate) fn censoring_survival_from(outcomes: impl IntoIterator<Item = (f64, u32)>) -> StepFunction {
    let mut obs: Vec<(f64, u32)> = outcomes.into_iter().collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = obs.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut g = 1.0;
    let mut i = 0;
    while i < n {
        let t = obs[i].0;
        let mut j = i;
        let mut censored = 0usize;
        let mut events = 0usize;
        while j < n && obs[j].0 == t {
            if obs[j].1 == 0 {
                censored += 1;
            } else {
                events += 1;
            }
            j += 1;
        }
        if censored > 0 {
            let at_risk = (n - i - events) as f64;
            g *= 1.0 - censored as f64 / at_risk;
            times.push(t);
            values.push(g);
        }
        i = j;
    }
    StepFunction::from_sorted(times, values, 1.0)
}

/// Aalen–Johansen cumulative incidence of event type `cause`.
pub fn aalen_johansen_cif(dataset: &Dataset, cause: u32) -> Result<StepFunction> {
    check_cause(dataset, cause)?;
    Ok(EventTable::from_dataset(dataset).aalen_johansen(cause))
}

/// Nelson–Aalen cumulative cause-specific hazard of event type `cause`.
pub fn nelson_aalen_csh(dataset: &Dataset, cause: u32) -> Result<StepFunction> {
    check_cause(dataset, cause)?;
    Ok(EventTable::from_dataset(dataset).nelson_aalen(cause))
}

/// Cumulative incidence of `cause` from the cumulative cause-specific hazards
/// of all causes.
///
/// Uses the discrete product form
/// `F_k(t) = sum_{t_l <= t} dH_k(t_l) * prod_{t_m < t_l} (1 - sum_j dH_j(t_m))`,
/// which coincides with the Aalen–Johansen estimator when the hazards are
/// Nelson–Aalen estimates from the same sample.
pub fn cif_from_csh(hazards: &[StepFunction], cause: u32) -> Result<StepFunction> {
    if cause == 0 || cause as usize > hazards.len() {
        return Err(Error::InvalidInput(format!(
            "event type {cause} outside 1..={}",
            hazards.len()
        )));
    }
    let grid = union_times(hazards.iter());
    let increments: Vec<Vec<f64>> = hazards
        .iter()
        .map(|h| {
            let mut prev = h.value_before_first();
            grid.iter()
                .map(|&t| {
                    let v = h.eval(t);
                    let d = v - prev;
                    prev = v;
                    d
                })
                .collect()
        })
        .collect();
    if increments.iter().flatten().any(|&d| d < 0.0) {
        return Err(Error::InvalidInput(
            "cumulative hazard has a negative increment".into(),
        ));
    }
    let target = &increments[cause as usize - 1];
    let mut s_prev = 1.0;
    let mut f = 0.0;
    let values = (0..grid.len())
        .map(|l| {
            f += s_prev * target[l];
            let total: f64 = increments.iter().map(|inc| inc[l]).sum();
            s_prev *= 1.0 - total;
            f
        })
        .collect();
    Ok(StepFunction::from_sorted(grid, values, 0.0))
}

/// `F(t) = 1 - exp(-H(t))` for a cumulative subdistribution hazard `H`.
pub fn cif_from_sdh(cumulative_sdh: &StepFunction) -> Result<StepFunction> {
    if cumulative_sdh.value_before_first() < 0.0 || !cumulative_sdh.is_nondecreasing() {
        return Err(Error::InvalidInput(
            "cumulative subdistribution hazard must be nonnegative and nondecreasing".into(),
        ));
    }
    Ok(cumulative_sdh.map(|h| 1.0 - (-h).exp()))
}

/// Cumulative cause-specific hazard of event 1 from its cumulative
/// subdistribution hazard in a two-event model:
/// `dH1_csh(t) = dH1_sdh(t) * (1 + F2(t-) / S(t-))`.
///
/// `F2` and `S` are evaluated as left limits, the state just before the jump.
pub fn csh_from_sdh_two_events(
    cumulative_sdh: &StepFunction,
    cif_competing: &StepFunction,
    survival: &StepFunction,
) -> Result<StepFunction> {
    let mut h = cumulative_sdh.value_before_first();
    let mut values = Vec::with_capacity(cumulative_sdh.len());
    for (&t, &d) in cumulative_sdh.times().iter().zip(&cumulative_sdh.increments()) {
        let s = survival.eval_left(t);
        if s <= 0.0 {
            return Err(Error::Domain(format!("event-free survival is zero before t={t}")));
        }
        h += d * (1.0 + cif_competing.eval_left(t) / s);
        values.push(h);
    }
    Ok(StepFunction::from_sorted(
        cumulative_sdh.times().to_vec(),
        values,
        cumulative_sdh.value_before_first(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::d3;
    use crate::data::SubjectRecord;

    const EPS: f64 = 1e-12;

    #[test]
    fn km_on_d3() {
        let s = km_event_free_survival(&d3());
        assert!((s.eval(1.0) - 2.0 / 3.0).abs() < EPS);
        assert!((s.eval(2.0) - 2.0 / 3.0).abs() < EPS);
        assert!(s.eval(3.0).abs() < EPS);
        assert_eq!(s.eval(0.5), 1.0);
    }

    #[test]
    fn km_all_censored_is_one() {
        let ds = Dataset::from_records(
            vec![
                SubjectRecord::new(1.0, 0, vec![]),
                SubjectRecord::new(2.0, 0, vec![]),
            ],
            1,
        )
        .unwrap();
        let s = km_event_free_survival(&ds);
        assert!(s.is_empty());
        assert_eq!(s.eval(10.0), 1.0);
    }

    #[test]
    fn km_without_censoring_is_empirical() {
        let times = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0];
        let ds = Dataset::from_records(
            times.iter().map(|&t| SubjectRecord::new(t, 1, vec![])).collect(),
            1,
        )
        .unwrap();
        let s = km_event_free_survival(&ds);
        for &t in &[0.5, 1.0, 1.7, 3.0, 4.5, 9.0, 10.0] {
            let emp = times.iter().filter(|&&x| x > t).count() as f64 / times.len() as f64;
            assert!((s.eval(t) - emp).abs() < EPS);
        }
    }

    #[test]
    fn censoring_survival_on_d3() {
        let g = censoring_survival(&d3());
        assert_eq!(g.eval(1.9), 1.0);
        assert!((g.eval(2.0) - 0.5).abs() < EPS);
        assert!((g.eval(7.0) - 0.5).abs() < EPS);
    }

    #[test]
    fn censoring_survival_edge_cases() {
        let ds = Dataset::from_records(
            (1..5).map(|t| SubjectRecord::new(t as f64, 1, vec![])).collect(),
            1,
        )
        .unwrap();
        assert_eq!(censoring_survival(&ds).eval(100.0), 1.0);
        let ds = Dataset::from_records(vec![SubjectRecord::new(5.0, 0, vec![]); 4], 1).unwrap();
        let g = censoring_survival(&ds);
        assert_eq!(g.eval(4.9), 1.0);
        assert_eq!(g.eval(5.0), 0.0);
    }

    #[test]
    fn tied_event_precedes_censoring() {
        // Event and censoring at t=2: the event leaves the censoring risk set first.
        let ds = Dataset::from_records(
            vec![
                SubjectRecord::new(1.0, 1, vec![]),
                SubjectRecord::new(2.0, 1, vec![]),
                SubjectRecord::new(2.0, 0, vec![]),
                SubjectRecord::new(3.0, 1, vec![]),
            ],
            1,
        )
        .unwrap();
        assert!((censoring_survival(&ds).eval(2.0) - 0.5).abs() < EPS);
        // ...but is still counted at risk for the event-free survival.
        let s = km_event_free_survival(&ds);
        assert!((s.eval(2.0) - 0.75 * (1.0 - 1.0 / 3.0)).abs() < EPS);
    }

    #[test]
    fn aalen_johansen_on_d3() {
        let ds = d3();
        let f1 = aalen_johansen_cif(&ds, 1).unwrap();
        let f2 = aalen_johansen_cif(&ds, 2).unwrap();
        assert!((f1.eval(1.0) - 1.0 / 3.0).abs() < EPS);
        assert!((f1.eval(50.0) - 1.0 / 3.0).abs() < EPS);
        assert!((f2.eval(3.0) - 2.0 / 3.0).abs() < EPS);
        assert!(aalen_johansen_cif(&ds, 3).is_err());
    }

    #[test]
    fn single_cause_aalen_johansen_is_one_minus_km() {
        let ds = Dataset::from_records(
            vec![
                SubjectRecord::new(1.0, 1, vec![]),
                SubjectRecord::new(2.0, 0, vec![]),
                SubjectRecord::new(2.5, 1, vec![]),
                SubjectRecord::new(4.0, 1, vec![]),
                SubjectRecord::new(5.0, 0, vec![]),
            ],
            1,
        )
        .unwrap();
        let f = aalen_johansen_cif(&ds, 1).unwrap();
        let s = km_event_free_survival(&ds);
        for &t in f.times() {
            assert!((f.eval(t) - (1.0 - s.eval(t))).abs() < EPS);
        }
    }

    #[test]
    fn nelson_aalen_on_d3() {
        let ds = d3();
        let h1 = nelson_aalen_csh(&ds, 1).unwrap();
        let h2 = nelson_aalen_csh(&ds, 2).unwrap();
        assert!((h1.eval(1.0) - 1.0 / 3.0).abs() < EPS);
        assert!((h1.eval(3.0) - 1.0 / 3.0).abs() < EPS);
        assert!((h2.eval(3.0) - 1.0).abs() < EPS);
        assert_eq!(h2.eval(2.0), 0.0);
    }

    #[test]
    fn nelson_aalen_without_cause_events_is_zero() {
        let ds = Dataset::from_records(
            vec![
                SubjectRecord::new(1.0, 1, vec![]),
                SubjectRecord::new(2.0, 0, vec![]),
            ],
            2,
        )
        .unwrap();
        let h = nelson_aalen_csh(&ds, 2).unwrap();
        assert!(h.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cif_from_csh_cases() {
        let h = StepFunction::new(vec![1.0], vec![0.5], 0.0).unwrap();
        let f = cif_from_csh(std::slice::from_ref(&h), 1).unwrap();
        assert!((f.eval(1.0) - 0.5).abs() < EPS);

        let zero = StepFunction::constant(0.0);
        let f = cif_from_csh(&[zero.clone(), zero], 2).unwrap();
        assert_eq!(f.eval(5.0), 0.0);

        let ds = d3();
        let hs = vec![
            nelson_aalen_csh(&ds, 1).unwrap(),
            nelson_aalen_csh(&ds, 2).unwrap(),
        ];
        for k in 1..=2 {
            let via_csh = cif_from_csh(&hs, k).unwrap();
            let aj = aalen_johansen_cif(&ds, k).unwrap();
            for t in [0.5, 1.0, 2.0, 3.0, 4.0] {
                assert!((via_csh.eval(t) - aj.eval(t)).abs() < EPS);
            }
        }

        let decreasing = StepFunction::new(vec![1.0, 2.0], vec![0.5, 0.2], 0.0).unwrap();
        assert!(cif_from_csh(&[decreasing], 1).is_err());
    }

    #[test]
    fn cif_from_sdh_cases() {
        assert_eq!(cif_from_sdh(&StepFunction::constant(0.0)).unwrap().eval(3.0), 0.0);
        let h = StepFunction::new(vec![1.0], vec![2f64.ln()], 0.0).unwrap();
        let f = cif_from_sdh(&h).unwrap();
        assert_eq!(f.eval(0.5), 0.0);
        assert!((f.eval(1.0) - 0.5).abs() < EPS);
        let bad = StepFunction::new(vec![1.0, 2.0], vec![1.0, 0.5], 0.0).unwrap();
        assert!(cif_from_sdh(&bad).is_err());
    }

    #[test]
    fn csh_from_sdh_cases() {
        let h_sdh = StepFunction::new(vec![1.0, 2.0], vec![0.1, 0.3], 0.0).unwrap();
        let s = StepFunction::constant(0.5);

        let same = csh_from_sdh_two_events(&h_sdh, &StepFunction::constant(0.0), &s).unwrap();
        assert_eq!(same, h_sdh);

        let f2 = StepFunction::constant(0.25);
        let csh = csh_from_sdh_two_events(&h_sdh, &f2, &s).unwrap();
        assert!((csh.increments()[0] - 0.15).abs() < EPS);
        assert!((csh.increments()[1] - 0.3).abs() < EPS);
        for (a, b) in csh.increments().iter().zip(h_sdh.increments()) {
            assert!(*a >= b);
        }

        let dead = StepFunction::new(vec![0.5], vec![0.0], 1.0).unwrap();
        assert!(matches!(
            csh_from_sdh_two_events(&h_sdh, &f2, &dead),
            Err(Error::Domain(_))
        ));
    }
}

use proptest::prelude::*;

use cmprisk::coxboost::{boost_fit, BoostConfig};
use cmprisk::finegray::{self, log_partial_likelihood, PenaltyKind, PenaltySpec};
use cmprisk::ipcw::weight_matrix;
use cmprisk::nonparam::{aalen_johansen_cif, km_event_free_survival};
use cmprisk::psdh::Standardizer;
use cmprisk::simgen::{generate, ScenarioSpec};
use cmprisk::{CsvSchema, Dataset, SubjectRecord};

fn grid_argmax(f: impl Fn(f64) -> f64) -> f64 {
    let best = |lo: f64, step: f64, count: usize| {
        (0..=count)
            .map(|i| lo + step * i as f64)
            .map(|b| (b, f(b)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    };
    let coarse = best(-5.0, 0.01, 1000);
    best(coarse - 0.01, 1e-5, 2000)
}

#[test]
fn simulated_data_survives_csv_round_trip() {
    let ds = generate(&ScenarioSpec::new(80, 14, 21)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    ds.save_csv(&path).unwrap();
    let back = Dataset::load_csv(&path, &CsvSchema::default()).unwrap();
    assert_eq!(back.n(), ds.n());
    assert_eq!(back.covariate_names(), ds.covariate_names());
    for (a, b) in ds.records().iter().zip(back.records()) {
        assert_eq!(a, b);
    }
}

#[test]
fn lasso_matches_penalized_grid_search() {
    for seed in 0..4 {
        let ds = generate(&ScenarioSpec::new(60, 12, 40 + seed)).unwrap().subset_covariates(1);
        let scale = Standardizer::fit(&ds).scale[0];
        let w = weight_matrix(&ds).unwrap();
        let (n, lambda) = (ds.n() as f64, 0.02);
        let oracle = grid_argmax(|b| log_partial_likelihood(&[b], &ds, &w).unwrap() - n * lambda * (b * scale).abs());
        let fit = finegray::fit(&ds, &PenaltySpec::new(PenaltyKind::Lasso, lambda), &[0.0], 1e-10, 10_000).unwrap();
        assert!((fit.beta[0] - oracle).abs() < 5e-4, "seed {seed}: {} vs {oracle}", fit.beta[0]);
    }
}

#[test]
fn unpenalized_boosting_approaches_partial_likelihood_maximum() {
    let ds = generate(&ScenarioSpec::new(50, 12, 77)).unwrap().subset_covariates(1);
    let w = weight_matrix(&ds).unwrap();
    let oracle = grid_argmax(|b| log_partial_likelihood(&[b], &ds, &w).unwrap());
    let config = BoostConfig { lambda: 0.0, ..BoostConfig::for_dataset(&ds, 200) };
    let trace = boost_fit(&ds, &config).unwrap();
    assert!(trace.is_ascending());
    assert!((trace.beta[0] - oracle).abs() < 1e-3);
}

fn outcomes() -> impl Strategy<Value = Vec<(u8, u32)>> {
    prop::collection::vec((1u8..15, 0u32..=3), 1..60)
}

proptest! {
    #[test]
    fn survival_and_cifs_partition_probability(rows in outcomes()) {
        let mut records: Vec<SubjectRecord> =
            rows.iter().map(|&(t, s)| SubjectRecord::new(t as f64 * 0.25, s, vec![])).collect();
        records[0].status = 1;
        let ds = Dataset::from_records(records, 3).unwrap();
        let s = km_event_free_survival(&ds);
        let cifs: Vec<_> = (1..=3).map(|k| aalen_johansen_cif(&ds, k).unwrap()).collect();
        for t in (0..70).map(|i| i as f64 * 0.0625) {
            let total = s.eval(t) + cifs.iter().map(|f| f.eval(t)).sum::<f64>();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!(cifs.iter().all(|f| (0.0..=1.0).contains(&f.eval(t))));
        }
    }
}

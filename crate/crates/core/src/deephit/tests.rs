use rand::Rng;

use super::*;
use crate::data::SubjectRecord;

fn toy(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            SubjectRecord::new(1.0 + i as f64 * 0.7 + rng.random_range(0.0..0.5), (i % 3) as u32, x)
        })
        .collect();
    Dataset::from_records(records, 2).unwrap()
}

fn setup(shared: &[usize], heads: &[usize]) -> (Network, Array2<f64>, BinnedData) {
    let ds = toy(8, 3, 11);
    let data = discretize(&ds, 5).unwrap();
    let x = design_matrix(&ds, &Standardizer::fit(&ds));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Network::new(3, 2, data.n_bins(), shared, heads, &mut rng);
    (net, x, data)
}

fn max_relative_error(net: &Network, x: &Array2<f64>, data: &BinnedData, w1: f64, alpha: f64, coords: &[usize]) -> f64 {
    let rows: Vec<usize> = (0..data.n()).collect();
    let (_, grad) = loss_and_gradient(net, x, &rows, data, w1, alpha, 0.1);
    let analytic = grad.parameters();
    let base = net.parameters();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for &c in coords {
        let eval = |delta: f64| {
            let mut theta = base.clone();
            theta[c] += delta;
            let mut probe = net.clone();
            probe.set_parameters(&theta);
            loss_and_gradient(&probe, x, &rows, data, w1, alpha, 0.1).0
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        let scale = analytic[c].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[c] - numeric).abs() / scale);
    }
    worst
}

#[test]
fn gradients_match_finite_differences_on_every_layer() {
    let (net, x, data) = setup(&[6, 5], &[4]);
    let all: Vec<usize> = (0..net.n_parameters()).collect();
    assert!(max_relative_error(&net, &x, &data, 1.0, 0.0, &all) < 1e-4);
    assert!(max_relative_error(&net, &x, &data, 0.0, 0.5, &all) < 1e-4);
}

#[test]
fn gradients_match_on_default_architecture() {
    let (net, x, data) = setup(&[128, 128], &[64]);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let coords: Vec<usize> = (0..5).map(|_| rng.random_range(0..net.n_parameters())).collect();
    assert!(max_relative_error(&net, &x, &data, 1.0, 0.0, &coords) < 1e-4);
    assert!(max_relative_error(&net, &x, &data, 0.0, 0.1, &coords) < 1e-4);
}

#[test]
fn softmax_output_is_a_pmf() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Network::new(4, 2, 6, &[16, 8], &[8], &mut rng);
    let x = Array2::from_shape_simple_fn((1000, 4), || rng.random_range(-5.0..5.0));
    let y = net.forward(x.view());
    for row in y.rows() {
        assert!((row.sum() - 1.0).abs() < 1e-6);
        assert!(row.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn zero_weights_give_uniform_pmf() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = Network::new(3, 2, 4, &[5], &[3], &mut rng);
    net.set_parameters(&vec![0.0; net.n_parameters()]);
    let y = net.forward(Array2::from_elem((2, 3), 0.7).view());
    assert!(y.iter().all(|&v| (v - 0.125).abs() < 1e-15));
}

#[test]
fn cif_from_uniform_pmf() {
    let pmf = JointPmf::uniform(2, 4);
    assert!((cif_from_pmf(&pmf, 1, 2).unwrap() - 0.25).abs() < 1e-15);
    let total: f64 = (1..=2).map(|k| cif_from_pmf(&pmf, k, 4).unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-15);
    assert!(cif_from_pmf(&pmf, 3, 1).is_err());
}

fn single(time: f64, status: u32, edges: Vec<f64>) -> BinnedData {
    BinnedData { bins: vec![bin_index(&edges, time)], times: vec![time], status: vec![status], edges, n_causes: 2 }
}

#[test]
fn likelihood_loss_examples() {
    let edges = vec![1.0, 2.0, 3.0, 4.0];
    let event = single(1.5, 1, edges.clone());
    let mut exact = vec![0.0; 8];
    exact[1] = 1.0;
    let pmf = JointPmf::new(2, 4, exact).unwrap();
    assert_eq!(loss_l1(&[pmf], &event).unwrap(), 0.0);
    let uniform = JointPmf::uniform(2, 4);
    assert!((loss_l1(&[uniform], &event).unwrap() - 8f64.ln()).abs() < 1e-12);

    let censored = single(1.5, 0, edges);
    let mut late = vec![0.0; 8];
    late[2] = 0.5;
    late[7] = 0.5;
    assert!(loss_l1(&[JointPmf::new(2, 4, late).unwrap()], &censored).unwrap().abs() < 1e-12);
}

#[test]
fn ranking_loss_examples() {
    let edges = vec![1.0, 2.0, 3.0, 4.0];
    let data = BinnedData {
        bins: vec![2, 4],
        times: vec![1.5, 3.5],
        status: vec![1, 0],
        edges: edges.clone(),
        n_causes: 2,
    };
    let u = JointPmf::uniform(2, 4);
    assert!((loss_l2(&[u.clone(), u.clone()], &data, 0.3, 0.1).unwrap() - 0.3).abs() < 1e-15);

    let mut a = vec![0.0; 8];
    a[1] = 0.5;
    a[3] = 0.5;
    let mut b = vec![0.0; 8];
    b[7] = 1.0;
    let pmfs = [JointPmf::new(2, 4, a).unwrap(), JointPmf::new(2, 4, b).unwrap()];
    assert!((loss_l2(&pmfs, &data, 1.0, 0.1).unwrap() - (-5.0f64).exp()).abs() < 1e-15);

    let censored = BinnedData { status: vec![0, 0], ..data };
    assert_eq!(loss_l2(&[u.clone(), u], &censored, 1.0, 0.1).unwrap(), 0.0);
}

#[test]
fn equal_frequency_edges() {
    let times: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(bin_edges(&times, 4).unwrap(), vec![25.0, 50.0, 75.0, 100.0]);
    assert_eq!(bin_edges(&[3.0; 10], 5).unwrap(), vec![3.0]);
    let ds = toy(40, 2, 1);
    let binned = discretize(&ds, 7).unwrap();
    let mut pairs: Vec<(f64, usize)> = binned.times.iter().copied().zip(binned.bins.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    assert!(binned.edges.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*binned.edges.last().unwrap(), ds.max_time());
}

#[test]
fn single_subject_overfits() {
    let ds = Dataset::from_records(vec![SubjectRecord::new(2.0, 1, vec![0.3, -0.2])], 2).unwrap();
    let config = NetConfig { alpha: 0.0, epochs: 2000, learning_rate: 1e-2, ..NetConfig::default() };
    let model = fit_network(&ds, &config).unwrap();
    let data = discretize(&ds, config.bins).unwrap();
    let pmf = model.predict_pmf(ds.x(0)).unwrap();
    assert!(loss_l1(&[pmf], &data).unwrap() < 0.01);
}

#[test]
fn linear_model_loss_decreases() {
    let ds = toy(30, 3, 2);
    let config = NetConfig {
        shared_layers: vec![],
        cause_layers: vec![],
        alpha: 0.0,
        bins: 5,
        epochs: 60,
        batch_size: 64,
        ..NetConfig::default()
    };
    let model = fit_network(&ds, &config).unwrap();
    assert!(model.loss_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn training_is_deterministic() {
    let ds = toy(40, 3, 4);
    let config = NetConfig { epochs: 3, bins: 6, shared_layers: vec![16], cause_layers: vec![8], ..NetConfig::default() };
    let a = train(&ds, &config).unwrap();
    let b = train(&ds, &config).unwrap();
    assert_eq!(a.model.loss_history, b.model.loss_history);
    assert_eq!(a.test_rows, b.test_rows);
    assert_eq!(a.test_rows.len(), 8);
    for cifs in &a.test_cifs {
        assert!(cifs.iter().all(|f| f.is_nondecreasing()));
        let end: f64 = cifs.iter().map(|f| f.eval(f64::INFINITY)).sum();
        assert!((end - 1.0).abs() < 1e-9);
    }
}

#[test]
fn trajectory_matches_bin_lookup() {
    let ds = toy(25, 3, 9);
    let config = NetConfig { epochs: 2, bins: 5, shared_layers: vec![8], cause_layers: vec![4], ..NetConfig::default() };
    let model = fit_network(&ds, &config).unwrap();
    let f = model.predict_cif(ds.x(0), 1).unwrap();
    for t in [0.5, 3.3, 7.1, 100.0] {
        if model.edges.contains(&t) {
            continue;
        }
        assert!((f.eval(t) - model.cif_at(ds.x(0), 1, t).unwrap()).abs() < 1e-12);
    }
    let mut buf = Vec::new();
    model.write_predictions(&mut buf, &[7], &[ds.x(0)]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * model.n_bins());
}

#[test]
fn rejects_bad_configs() {
    assert!(NetConfig { sigma: 0.0, ..NetConfig::default() }.validate().is_err());
    assert!(NetConfig { alpha: -1.0, ..NetConfig::default() }.validate().is_err());
    assert!(NetConfig { bins: 1, ..NetConfig::default() }.validate().is_err());
    assert!(train(&toy(10, 2, 0), &NetConfig::default()).is_err());
}

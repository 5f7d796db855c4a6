use dptransfer::classifier::{
    classify, kernel_statistic, private_weighted_statistic, theoretical_weights, PrivateEvaluation, ServerDataset,
    TransferWeights,
};
use dptransfer::kernels::KernelSpec;
use dptransfer::privacy::PrivacyBudget;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(n: usize, seed: u64, eta: impl Fn(&[f64]) -> f64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
    let labels = rows.iter().map(|x| u8::from(r.random::<f64>() < eta(x))).collect();
    (rows, labels)
}

#[test]
fn statistic_is_unbiased_for_linear_eta() {
    // a symmetric kernel integrates a linear function exactly, so E T(x0) = (η(x0) − ½) g(x0)
    let eta = |x: &[f64]| 0.3 + 0.4 * x[0];
    let (n, h, x0) = (100_000, 0.1, [0.7, 0.5]);
    let (rows, labels) = sample(n, 11, eta);
    let spec = KernelSpec::triangular(2).unwrap();
    let data = ServerDataset::new(0, 2, &rows, labels.clone()).unwrap();
    let t = kernel_statistic(&data, &spec, h, &x0).unwrap();
    let terms: Vec<f64> = rows
        .iter()
        .zip(&labels)
        .map(|(x, &y)| (y as f64 - 0.5) * spec.eval_scaled(x, &x0, h) / (h * h))
        .collect();
    let mean = terms.iter().sum::<f64>() / n as f64;
    let var = terms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    assert!((t - mean).abs() < 1e-12);
    let want = eta(&x0) - 0.5;
    assert!((t - want).abs() < 3.0 * se, "T = {t}, expected {want} ± {}", 3.0 * se);
}

#[test]
fn proportional_public_weights_equal_the_pooled_statistic() {
    let spec = KernelSpec::triangular(2).unwrap();
    let sizes = [120, 40, 75];
    let mut servers = Vec::new();
    let mut pooled_rows = Vec::new();
    let mut pooled_labels = Vec::new();
    for (j, &n) in sizes.iter().enumerate() {
        let (rows, labels) = sample(n, 20 + j as u64, |x| x[1]);
        servers.push(ServerDataset::new(j, 2, &rows, labels.clone()).unwrap());
        pooled_rows.extend(rows);
        pooled_labels.extend(labels);
    }
    let pooled = ServerDataset::new(0, 2, &pooled_rows, pooled_labels).unwrap();
    let w = TransferWeights::proportional(&sizes).unwrap();
    let queries: Vec<Vec<f64>> = (0..25).map(|i| vec![(i % 5) as f64 / 4.0, (i / 5) as f64 / 4.0]).collect();
    let budgets = [PrivacyBudget::public(); 3];
    let eval = private_weighted_statistic(&servers, &spec, 0.3, &w, &budgets, &queries, 0).unwrap();
    for (q, v) in queries.iter().zip(&eval.values) {
        let p = kernel_statistic(&pooled, &spec, 0.3, q).unwrap();
        assert!((v - p).abs() < 1e-12, "{v} vs {p}");
    }
}

#[test]
fn classification_is_scale_invariant() {
    let spec = KernelSpec::triangular(2).unwrap();
    let (rows, labels) = sample(300, 3, |x| x[0]);
    let data = ServerDataset::new(0, 2, &rows, labels).unwrap();
    let budgets = [PrivacyBudget::new(1.0, 1e-3).unwrap()];
    let queries: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, 0.5]).collect();
    let eval = private_weighted_statistic(&[data], &spec, 0.25, &TransferWeights::target_only(0), &budgets, &queries, 9)
        .unwrap();
    let base = classify(&eval);
    for c in [1e-6, 0.3, 7.0, 1e6] {
        let scaled = PrivateEvaluation { values: eval.values.iter().map(|v| v * c).collect(), ..eval.clone() };
        assert_eq!(classify(&scaled), base);
    }
}

#[test]
fn weights_are_normalised() {
    let w = TransferWeights::from_unnormalized(vec![3.0, 1.0, 0.0, 4.0]).unwrap();
    assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let m = r.random_range(0..6);
        let n: Vec<usize> = (0..=m).map(|_| r.random_range(1..5000)).collect();
        let eps: Vec<f64> = (0..=m).map(|_| if r.random::<bool>() { f64::INFINITY } else { r.random_range(0.01..5.0) }).collect();
        let gamma: Vec<f64> = (0..m).map(|_| r.random_range(0.2..5.0)).collect();
        let w = theoretical_weights(&n, &eps, &gamma, 0.5, 2, r.random_range(0.01..1.0)).unwrap();
        assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.as_slice().iter().all(|&u| u >= 0.0));
    }
}

#[test]
fn empty_sources_are_dropped() {
    let spec = KernelSpec::triangular(2).unwrap();
    let (rows, labels) = sample(50, 4, |_| 0.9);
    let target = ServerDataset::new(0, 2, &rows, labels).unwrap();
    let empty = ServerDataset::new(1, 2, &[], vec![]).unwrap();
    let w = TransferWeights::from_unnormalized(vec![0.5, 0.5]).unwrap();
    let eval = private_weighted_statistic(
        &[target.clone(), empty],
        &spec,
        0.5,
        &w,
        &[PrivacyBudget::public(); 2],
        &[vec![0.5, 0.5]],
        0,
    )
    .unwrap();
    assert_eq!(eval.weights.as_slice(), &[1.0, 0.0]);
    assert_eq!(eval.values[0], kernel_statistic(&target, &spec, 0.5, &[0.5, 0.5]).unwrap());
}

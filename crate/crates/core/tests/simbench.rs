use dptransfer::privacy::PrivacyBudget;
use dptransfer::simbench::design::{bayes_accuracy, generate_sample, target_test_set};
use dptransfer::simbench::hist::{hist_noise_sd, release_histograms};
use dptransfer::simbench::{run_scenario, Method, Role, SimScenario};

#[test]
fn target_labels_are_balanced() {
    let n = 1_000_000;
    let data = generate_sample(n, Role::Target, 0, 42).unwrap();
    let mean = data.labels().iter().map(|&y| y as f64).sum::<f64>() / n as f64;
    let se = (mean * (1.0 - mean) / n as f64).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * se, "mean label {mean} (SE {se})");
}

#[test]
fn histogram_noise_has_the_calibrated_variance() {
    let data = generate_sample(2000, Role::Target, 0, 1).unwrap();
    let h = 1.0 / 256.0;
    let budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
    let clean = release_histograms(std::slice::from_ref(&data), h, &[PrivacyBudget::public()], 0).unwrap();
    let sd = hist_noise_sd(data.n(), h, 2, &budget).unwrap();
    let mut sq = 0.0;
    let mut count = 0usize;
    for seed in 0..2 {
        let noisy = release_histograms(std::slice::from_ref(&data), h, &[budget], seed).unwrap();
        for (a, b) in noisy.values()[0].iter().zip(&clean.values()[0]) {
            sq += (a - b).powi(2);
            count += 1;
        }
    }
    assert!(count >= 100_000);
    let var = sq / count as f64;
    assert!((var / (sd * sd) - 1.0).abs() < 0.03, "variance {var} vs {}", sd * sd);
}

#[test]
fn accuracies_do_not_beat_bayes() {
    let mut s = SimScenario::new(300, 1, 0.5, 1.0);
    s.methods = vec![Method::Dtk, Method::DtHist, Method::TargetDtk, Method::AdaptDtk, Method::AdaptAll];
    s.replications = 6;
    s.test_size = 1000;
    let report = run_scenario(&s).unwrap();
    for row in &report.summary {
        let slack = 3.0 * (row.se_accuracy.powi(2) + report.bayes_se.powi(2)).sqrt();
        assert!(
            row.mean_accuracy <= report.bayes_accuracy + slack,
            "{}: {} vs Bayes {} + {slack}",
            row.method.name(),
            row.mean_accuracy,
            report.bayes_accuracy
        );
    }
}

#[test]
fn scenarios_are_deterministic() {
    let mut s = SimScenario::new(200, 2, 1.5, 0.5);
    s.replications = 2;
    s.test_size = 300;
    s.methods = vec![Method::Dtk, Method::AdaptHomog, Method::AdaptSamp];
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(a.records, b.records);
}

#[test]
fn bayes_accuracy_matches_the_test_labels() {
    let (bayes, se) = bayes_accuracy(200_000, 3);
    let test = target_test_set(200_000, 4);
    let hits = test
        .labels
        .iter()
        .zip(&test.eta)
        .filter(|(&y, &p)| y == u8::from(p >= 0.5))
        .count() as f64
        / test.labels.len() as f64;
    let se_hits = (hits * (1.0 - hits) / test.labels.len() as f64).sqrt();
    assert!((hits - bayes).abs() < 4.0 * (se * se + se_hits * se_hits).sqrt(), "{hits} vs {bayes}");
}

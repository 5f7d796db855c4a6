//! Classification metrics.

/// Fraction of matching labels.
pub fn accuracy(pred: &[u8], truth: &[u8]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "prediction and truth lengths differ");
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / pred.len() as f64
}

/// F1 score of class 1. Defined as 1 when there are no positives at all.
pub fn f1_score(pred: &[u8], truth: &[u8]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "prediction and truth lengths differ");
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => {}
        }
    }
    if tp + fp + fn_ == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// Monte Carlo excess risk `mean |2η − 1| 1(f ≠ f*)` with `f* = 1(η ≥ 1/2)`.
pub fn excess_risk(pred: &[u8], eta: &[f64]) -> f64 {
    assert_eq!(pred.len(), eta.len(), "prediction and eta lengths differ");
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter()
        .zip(eta)
        .filter(|(&p, &e)| p != u8::from(e >= 0.5))
        .map(|(_, &e)| (2.0 * e - 1.0).abs())
        .sum::<f64>()
        / pred.len() as f64
}

/// Mean and standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

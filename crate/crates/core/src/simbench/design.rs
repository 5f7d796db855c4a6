//! The two-dimensional simulation design.
//!
//! Covariates are uniform on the unit square. The target's regression function
//! changes sign across the lines `x₁ = 1/2` and `x₂ = 1/2`; the sources share its
//! decision boundary with the signal strength bent by the exponent `γ`.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution};

use crate::classifier::ServerDataset;
use crate::{seed, Error, Result};

/// `1 ∧ (1/2 + sign((x₁−½)(x₂−½)) |x₁−½|^¼ |x₂−½|^¼)₊`.
pub fn eta_target(x: &[f64]) -> f64 {
    let (a, b) = (x[0] - 0.5, x[1] - 0.5);
    let ab = a * b;
    if ab == 0.0 {
        return 0.5;
    }
    (0.5 + ab.signum() * a.abs().powf(0.25) * b.abs().powf(0.25)).clamp(0.0, 1.0)
}

/// `1 ∧ (1/2 + sign(η_T − ½) |η_T − ½|^γ)₊`.
pub fn eta_source(x: &[f64], gamma: f64) -> f64 {
    eta_from_target(eta_target(x), gamma)
}

pub(crate) fn eta_from_target(eta: f64, gamma: f64) -> f64 {
    let dev = eta - 0.5;
    if dev == 0.0 {
        return 0.5;
    }
    (0.5 + dev.signum() * dev.abs().powf(gamma)).clamp(0.0, 1.0)
}

/// Role of a simulated server: the target, or a source with exponent `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Role {
    Target,
    Source { gamma: f64 },
}

impl Role {
    pub fn eta(&self, x: &[f64]) -> f64 {
        match *self {
            Role::Target => eta_target(x),
            Role::Source { gamma } => eta_source(x, gamma),
        }
    }
}

/// Uniform points on the unit square.
pub fn uniform_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect()
}

/// A server sample of size `n`: uniform covariates and Bernoulli(η) labels.
pub fn generate_sample(n: usize, role: Role, server_id: usize, seed: u64) -> Result<ServerDataset> {
    if let Role::Source { gamma } = role {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Input(format!("gamma must be positive, got {gamma}")));
        }
    }
    let mut rng = seed::rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = vec![rng.random::<f64>(), rng.random::<f64>()];
        let p = role.eta(&x);
        let y = Bernoulli::new(p).map_err(|e| Error::Numerical(e.to_string()))?.sample(&mut rng);
        labels.push(u8::from(y));
        rows.push(x);
    }
    ServerDataset::new(server_id, 2, &rows, labels)
}

/// Held-out target points with observed labels and the true regression function.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub eta: Vec<f64>,
}

pub fn target_test_set(size: usize, seed: u64) -> TestSet {
    let mut rng = seed::rng(seed);
    let mut points = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    let mut eta = Vec::with_capacity(size);
    for _ in 0..size {
        let x = vec![rng.random::<f64>(), rng.random::<f64>()];
        let p = eta_target(&x);
        labels.push(u8::from(rng.random::<f64>() < p));
        eta.push(p);
        points.push(x);
    }
    TestSet { points, labels, eta }
}

/// Monte Carlo estimate of `E[max(η_T, 1 − η_T)]` with its standard error.
pub fn bayes_accuracy(samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = seed::rng(seed);
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..samples {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let p = eta_target(&x);
        let v = p.max(1.0 - p);
        sum += v;
        sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

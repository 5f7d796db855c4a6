//! Gaussian-process release mechanism.
//!
//! A server holding `n` samples releases its kernel statistic `T_h` plus
//! `σ · ξ`, where `ξ` is a centred Gaussian process with covariance
//! `K((s − t)/h)` and
//!
//! ```text
//! σ = √(2 c_K log_term) / (n · (ε / divisor) · h^d)
//! ```
//!
//! `log_term` is `log(2/δ)` for a one-shot release and `log(2|H|/δ)` when the
//! budget is split over a bandwidth grid `H` (`divisor = |H|`). The process is
//! only ever observed on a finite set of query points, so a release is the
//! exact joint marginal of the process on those points.

use std::collections::HashMap;

use nalgebra::{Cholesky, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::kernels::{gram_matrix, KernelSpec};
use crate::{seed, Error, Result};

/// Per-server privacy parameters. `epsilon = ∞` marks a public server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be in (0, ∞], got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Config(format!("delta must be in [0, 1), got {delta}")));
        }
        if epsilon.is_finite() && delta == 0.0 {
            return Err(Error::Config(
                "the Gaussian mechanism needs delta > 0 when epsilon is finite".into(),
            ));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn public() -> Self {
        Self { epsilon: f64::INFINITY, delta: 0.0 }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_public(&self) -> bool {
        self.epsilon.is_infinite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCalibration {
    /// Multiplier of the unit-covariance process.
    pub sigma: f64,
    /// RKHS norm bound `√c_K / (n h^d)`.
    pub sensitivity_bound: f64,
    /// `log(2 divisor / δ)`; zero for a public server.
    pub log_term: f64,
    pub budget_divisor: usize,
}

/// Worst-case RKHS norm of `T_h − T_h'` when one datum is replaced.
pub fn rkhs_sensitivity(spec: &KernelSpec, n: usize, h: f64) -> f64 {
    spec.c_k().sqrt() / (n as f64 * h.powi(spec.dim() as i32))
}

/// Noise multiplier for a server with `n` samples releasing at bandwidth `h`.
///
/// With `budget_divisor = k` each release spends `(ε/k, δ/k)`, which is the
/// per-bandwidth share of the budget on a grid of `k` bandwidths.
pub fn calibrate(
    spec: &KernelSpec,
    n: usize,
    h: f64,
    budget: &PrivacyBudget,
    budget_divisor: usize,
) -> Result<NoiseCalibration> {
    if n == 0 {
        return Err(Error::Input("cannot calibrate noise for an empty server".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Input(format!("bandwidth must be positive, got {h}")));
    }
    if budget_divisor == 0 {
        return Err(Error::Input("budget divisor must be at least 1".into()));
    }
    let sensitivity_bound = rkhs_sensitivity(spec, n, h);
    if budget.is_public() {
        return Ok(NoiseCalibration { sigma: 0.0, sensitivity_bound, log_term: 0.0, budget_divisor });
    }
    if budget.delta() <= 0.0 {
        return Err(Error::Config("finite epsilon requires delta > 0".into()));
    }
    let k = budget_divisor as f64;
    let log_term = (2.0 * k / budget.delta()).ln();
    let eps_share = budget.epsilon() / k;
    let sigma = (2.0 * spec.c_k() * log_term).sqrt()
        / (n as f64 * eps_share * h.powi(spec.dim() as i32));
    Ok(NoiseCalibration { sigma, sensitivity_bound, log_term, budget_divisor })
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// One draw of the unit-variance process `ξ` at `points`, deterministic in `seed`.
///
/// Coincident points receive identical values. The Gram matrix of the distinct
/// points is factorised with a diagonal jitter starting at `1e-10 c_K` and
/// escalating tenfold up to `1e-6 c_K`.
pub fn sample_process(
    spec: &KernelSpec,
    points: &[Vec<f64>],
    h: f64,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = seed::rng(rng_seed);
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut slot = Vec::with_capacity(points.len());
    for p in points {
        if p.len() != spec.dim() {
            return Err(Error::Input(format!(
                "query point has dimension {}, expected {}",
                p.len(),
                spec.dim()
            )));
        }
        let key: Vec<u64> = p.iter().map(|x| (x + 0.0).to_bits()).collect();
        let next = distinct.len();
        let id = *index.entry(key).or_insert_with(|| {
            distinct.push(p.clone());
            next
        });
        slot.push(id);
    }
    let q = distinct.len();
    if q == 0 {
        return Ok(Vec::new());
    }
    let z = DVector::from_iterator(q, (0..q).map(|_| StandardNormal.sample(&mut rng)));
    let values = if q == 1 {
        z * spec.c_k().sqrt()
    } else {
        let gram = gram_matrix(spec, &distinct, h)?;
        let mut jitter = JITTER_START;
        let factor = loop {
            let mut g = gram.clone();
            for i in 0..q {
                g[(i, i)] += jitter * spec.c_k();
            }
            if let Some(ch) = Cholesky::new(g) {
                break ch;
            }
            jitter *= 10.0;
            if jitter > JITTER_MAX * (1.0 + 1e-9) {
                let min_eig = gram.symmetric_eigenvalues().min();
                let hint = if spec.is_positive_definite() {
                    ""
                } else {
                    " (the kernel family is not positive definite)"
                };
                return Err(Error::Numerical(format!(
                    "Gram matrix of {q} points at h = {h} could not be factorised with jitter up to \
                     {JITTER_MAX:e}·c_K; smallest eigenvalue {min_eig:e}{hint}"
                )));
            }
        };
        factor.l() * z
    };
    Ok(slot.into_iter().map(|i| values[i]).collect())
}

/// `σ · ξ` at `points`. Returns zeros without touching the generator when `σ = 0`.
pub fn sample_noise(
    spec: &KernelSpec,
    points: &[Vec<f64>],
    h: f64,
    calibration: &NoiseCalibration,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    if calibration.sigma == 0.0 {
        return Ok(vec![0.0; points.len()]);
    }
    let xi = sample_process(spec, points, h, rng_seed)?;
    Ok(xi.into_iter().map(|v| calibration.sigma * v).collect())
}

/// Noise draws for one classification session over a fixed set of query points.
///
/// Each `(server, bandwidth)` pair is drawn at most once; later requests reuse
/// the cached draw, so repeated evaluation spends no additional budget. The
/// cache holds unit-variance draws and scales them by the caller's `σ`.
/// A session is meant to be owned by one thread.
#[derive(Debug)]
pub struct NoiseSession {
    points: Vec<Vec<f64>>,
    seed: u64,
    cache: HashMap<(usize, u64), Vec<f64>>,
}

impl NoiseSession {
    pub fn new(points: Vec<Vec<f64>>, seed: u64) -> Self {
        Self { points, seed, cache: HashMap::new() }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Number of distinct `(server, bandwidth)` draws made so far.
    pub fn draws(&self) -> usize {
        self.cache.len()
    }

    /// `σ_server · ξ_server,h` at the session's points.
    pub fn noise(
        &mut self,
        spec: &KernelSpec,
        server: usize,
        h: f64,
        calibration: &NoiseCalibration,
    ) -> Result<Vec<f64>> {
        if calibration.sigma == 0.0 {
            return Ok(vec![0.0; self.points.len()]);
        }
        let key = (server, h.to_bits());
        if !self.cache.contains_key(&key) {
            let s = seed::derive(self.seed, &[server as u64, h.to_bits()]);
            let xi = sample_process(spec, &self.points, h, s)?;
            self.cache.insert(key, xi);
        }
        Ok(self.cache[&key].iter().map(|v| calibration.sigma * v).collect())
    }
}

//! Lepski-type selection of the bandwidth and the transfer weights.
//!
//! Every server releases its statistic once per bandwidth of a dyadic grid `H`,
//! spending `(ε_j/|H|, δ_j/|H|)` on each release. For each bandwidth the target
//! forms a signal-to-noise index `ρ(h)` from the noisy releases and a variance
//! proxy, maximised over the admissible weights. The selected bandwidth is the
//! smallest one whose index clears a threshold, or the argmax when none does.
//!
//! Two weight families are supported: the homogeneous family, where sources
//! share `1 − w_0` in proportion to their restricted precisions `u_j(h)`, and
//! the full simplex over all servers.

use std::fmt;
use std::str::FromStr;

use crate::classifier::{clamp_to_cube, kernel_statistic, ServerDataset};
use crate::kernels::KernelSpec;
use crate::privacy::{calibrate, NoiseSession, PrivacyBudget};
use crate::{Error, Result};

/// Dyadic bandwidths `1, 1/2, …, 2^(−J)` with `J = ⌊log₂(n_*)/d⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthGrid {
    values: Vec<f64>,
    n_star: f64,
}

impl BandwidthGrid {
    /// Bandwidths in decreasing order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_star(&self) -> f64 {
        self.n_star
    }
}

/// `n_* = Σ_j n_j ∧ n_j² ε_j²`.
pub fn effective_sample_size(n: &[usize], eps: &[f64]) -> f64 {
    n.iter()
        .zip(eps)
        .map(|(&n, &e)| {
            let n = n as f64;
            if e.is_infinite() {
                n
            } else {
                n.min(n * n * e * e)
            }
        })
        .sum()
}

pub fn build_grid(n: &[usize], eps: &[f64], d: usize) -> Result<BandwidthGrid> {
    if n.len() != eps.len() {
        return Err(Error::Input(format!("{} sizes but {} budgets", n.len(), eps.len())));
    }
    if d == 0 {
        return Err(Error::Input("dimension must be positive".into()));
    }
    let n_star = effective_sample_size(n, eps);
    if !(n_star >= 1.0) {
        return Err(Error::Degenerate(format!(
            "effective sample size {n_star} is below 1; no bandwidth can be resolved"
        )));
    }
    // A small tolerance keeps exact powers of two on the right side of the floor.
    let top = (n_star.log2() / d as f64 + 1e-9).floor() as i32;
    let values = (0..=top).map(|j| 2f64.powi(-j)).collect();
    Ok(BandwidthGrid { values, n_star })
}

/// Source shares `u_j(h)/Σ_k u_k(h)` with `u_j(h) = n_j ∧ n_j² (ε_j/|H|)² h^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedWeights {
    shares: Vec<f64>,
}

impl RestrictedWeights {
    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    /// True when no source carries weight, so only `w_0 = 1` is admissible.
    pub fn is_degenerate(&self) -> bool {
        self.shares.iter().all(|&s| s == 0.0)
    }

    /// Full weight vector `(w_0, (1 − w_0) u_1/U, …)`.
    pub fn at(&self, w0: f64) -> Vec<f64> {
        let w0 = if self.is_degenerate() { 1.0 } else { w0.clamp(0.0, 1.0) };
        std::iter::once(w0).chain(self.shares.iter().map(|s| (1.0 - w0) * s)).collect()
    }
}

/// The homogeneous weight family at bandwidth `h`; `n` and `eps` include the target.
pub fn restricted_weights(h: f64, n: &[usize], eps: &[f64], h_size: usize, d: usize) -> RestrictedWeights {
    let k = h_size.max(1) as f64;
    let hd = h.powi(d as i32);
    let u: Vec<f64> = n
        .iter()
        .zip(eps)
        .skip(1)
        .map(|(&n, &e)| {
            let n = n as f64;
            if e.is_infinite() {
                n
            } else {
                let e = e / k;
                n.min(n * n * e * e * hd)
            }
        })
        .collect();
    let total: f64 = u.iter().sum();
    let shares = if total > 0.0 { u.iter().map(|v| v / total).collect() } else { vec![0.0; u.len()] };
    RestrictedWeights { shares }
}

/// Variance coefficient of each server's release at bandwidth `h`:
/// `c_K g_max/(3 n_j h^d) + 2 c_K² log(2|H|/δ_j) / (n_j² (ε_j/|H|)² h^(2d))`.
pub fn variance_coefficients(
    spec: &KernelSpec,
    h: f64,
    n: &[usize],
    budgets: &[PrivacyBudget],
    h_size: usize,
    g_max: f64,
) -> Vec<f64> {
    let ck = spec.c_k();
    let hd = h.powi(spec.dim() as i32);
    let k = h_size.max(1) as f64;
    n.iter()
        .zip(budgets)
        .map(|(&n, b)| {
            let n = n as f64;
            let sampling = ck * g_max / (3.0 * n * hd);
            let privacy = if b.is_public() {
                0.0
            } else {
                let e = b.epsilon() / k;
                2.0 * ck * ck * (2.0 * k / b.delta()).ln() / (n * n * e * e * hd * hd)
            };
            sampling + privacy
        })
        .collect()
}

/// Variance proxy of the homogeneous combination with target weight `w0`.
#[allow(clippy::too_many_arguments)]
pub fn variance_proxy_homog(
    h: f64,
    w0: f64,
    n: &[usize],
    budgets: &[PrivacyBudget],
    h_size: usize,
    spec: &KernelSpec,
    g_max: f64,
) -> f64 {
    let eps: Vec<f64> = budgets.iter().map(|b| b.epsilon()).collect();
    let w = restricted_weights(h, n, &eps, h_size, spec.dim()).at(w0);
    variance_proxy_general(h, &w, n, budgets, h_size, spec, g_max)
}

/// `Σ_j w_j² a_j(h)`.
pub fn variance_proxy_general(
    h: f64,
    w: &[f64],
    n: &[usize],
    budgets: &[PrivacyBudget],
    h_size: usize,
    spec: &KernelSpec,
    g_max: f64,
) -> f64 {
    let a = variance_coefficients(spec, h, n, budgets, h_size, g_max);
    w.iter().zip(&a).map(|(w, a)| w * w * a).sum()
}

/// Maximises `(w Ã + (1 − w) B̃)² / (w² a + (1 − w)² b)` over `w ∈ [0, 1]`.
///
/// The ratio's derivative has a single interior root `w = bÃ/(aB̃ + bÃ)`, so the
/// maximum is attained there or at an endpoint. Returns `(ρ, w)`; ties favour
/// the target.
pub fn snr_homog_closed(a_tilde: f64, b_tilde: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let ratio = |w: f64| {
        let num = w * a_tilde + (1.0 - w) * b_tilde;
        let den = w * w * a + (1.0 - w) * (1.0 - w) * b;
        if den > 0.0 {
            Some(num * num / den)
        } else {
            None
        }
    };
    let mut candidates = vec![1.0];
    let denom = a * b_tilde + b * a_tilde;
    if denom != 0.0 {
        candidates.push((b * a_tilde / denom).clamp(0.0, 1.0));
    }
    candidates.push(0.0);
    let mut best: Option<(f64, f64)> = None;
    for w in candidates {
        if let Some(r) = ratio(w) {
            if best.is_none_or(|(br, _)| r > br) {
                best = Some((r, w));
            }
        }
    }
    best.ok_or_else(|| Error::Degenerate("variance proxy vanishes for every candidate weight".into()))
}

/// Maximises `(Σ w_j t_j)² / Σ w_j² a_j` over the simplex.
///
/// The ratio is scale-invariant in `w`, so restricted to one sign of `t` the
/// Cauchy–Schwarz optimum `w_j ∝ t_j/a_j` is feasible; the answer is the better
/// of the two signs.
pub fn snr_general_closed(t: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)> {
    if t.len() != a.len() || t.is_empty() {
        return Err(Error::Input("statistics and variance coefficients must have equal, positive length".into()));
    }
    if a.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate("variance coefficients must be positive".into()));
    }
    let pos: f64 = t.iter().zip(a).filter(|(t, _)| **t > 0.0).map(|(t, a)| t * t / a).sum();
    let neg: f64 = t.iter().zip(a).filter(|(t, _)| **t < 0.0).map(|(t, a)| t * t / a).sum();
    if pos == 0.0 && neg == 0.0 {
        return Ok((0.0, vec![1.0 / t.len() as f64; t.len()]));
    }
    let sign = if pos >= neg { 1.0 } else { -1.0 };
    let raw: Vec<f64> = t.iter().zip(a).map(|(t, a)| (sign * t).max(0.0) / a).collect();
    let total: f64 = raw.iter().sum();
    Ok((pos.max(neg), raw.into_iter().map(|v| v / total).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdVariant {
    /// `C_* log(n_* |H| (m + 1))`.
    #[default]
    Prose,
    /// `C_* log(2 n_* |H|)`.
    Box,
}

impl fmt::Display for ThresholdVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdVariant::Prose => "prose",
            ThresholdVariant::Box => "box",
        })
    }
}

impl FromStr for ThresholdVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prose" => Ok(ThresholdVariant::Prose),
            "box" => Ok(ThresholdVariant::Box),
            _ => Err(Error::Config(format!("unknown threshold variant '{s}' (expected prose or box)"))),
        }
    }
}

/// How the weights are chosen at each bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightPolicy {
    /// Free weights on the simplex (AdaptAll).
    Simplex,
    /// All weight on the target (AdaptTar).
    TargetOnly,
    /// Weights proportional to sample sizes (AdaptSamp).
    SampleSize,
    /// Target weight free, sources split by restricted precision (AdaptHomog).
    Homogeneous,
}

impl WeightPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            WeightPolicy::Simplex => "AdaptAll",
            WeightPolicy::TargetOnly => "AdaptTar",
            WeightPolicy::SampleSize => "AdaptSamp",
            WeightPolicy::Homogeneous => "AdaptHomog",
        }
    }
}

impl FromStr for WeightPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adaptall" | "simplex" => Ok(WeightPolicy::Simplex),
            "adapttar" | "target" => Ok(WeightPolicy::TargetOnly),
            "adaptsamp" | "sample-size" => Ok(WeightPolicy::SampleSize),
            "adapthomog" | "homogeneous" => Ok(WeightPolicy::Homogeneous),
            other => Err(Error::Config(format!(
                "unknown weight policy '{other}' (expected AdaptAll, AdaptTar, AdaptSamp or AdaptHomog)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    /// Upper bound on the covariate density used by the variance proxy.
    pub g_max: f64,
    pub threshold: ThresholdVariant,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { g_max: 1.0, threshold: ThresholdVariant::Prose }
    }
}

/// Outcome of the selection rule at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub h: f64,
    pub h_index: usize,
    /// Weights over all servers, zero for dropped ones.
    pub weights: Vec<f64>,
    /// Signal-to-noise index at every grid bandwidth.
    pub rho: Vec<f64>,
    pub threshold: f64,
    /// True when some bandwidth cleared the threshold.
    pub exceeded: bool,
    /// Weighted noisy statistic at the selected bandwidth.
    pub value: f64,
    /// `1` iff `value > 0`.
    pub label: u8,
}

#[derive(Debug, Clone)]
struct Level {
    /// Noisy statistic, indexed `[server][point]` over active servers.
    stats: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    shares: RestrictedWeights,
}

/// Noisy releases of every server at every grid bandwidth for a set of query points.
///
/// Building the session draws each `(server, bandwidth)` noise process exactly
/// once; selection afterwards is pure post-processing.
#[derive(Debug, Clone)]
pub struct AdaptiveSession {
    active: Vec<usize>,
    total_servers: usize,
    n: Vec<usize>,
    grid: BandwidthGrid,
    levels: Vec<Level>,
    points: Vec<Vec<f64>>,
    config: AdaptiveConfig,
    draws: usize,
}

impl AdaptiveSession {
    /// Releases every non-empty server's statistic at every grid bandwidth.
    ///
    /// Empty sources are dropped; an empty target is an error.
    pub fn new(
        servers: &[ServerDataset],
        spec: &KernelSpec,
        budgets: &[PrivacyBudget],
        queries: &[Vec<f64>],
        seed: u64,
        config: AdaptiveConfig,
    ) -> Result<Self> {
        if servers.is_empty() {
            return Err(Error::Input("at least the target server is required".into()));
        }
        if budgets.len() != servers.len() {
            return Err(Error::Input(format!("{} budgets for {} servers", budgets.len(), servers.len())));
        }
        if servers[0].is_empty() {
            return Err(Error::EmptyServer { server: servers[0].server_id() });
        }
        if !(config.g_max > 0.0 && config.g_max.is_finite()) {
            return Err(Error::Config(format!("g_max must be positive, got {}", config.g_max)));
        }
        let active: Vec<usize> = (0..servers.len()).filter(|&j| !servers[j].is_empty()).collect();
        let n: Vec<usize> = active.iter().map(|&j| servers[j].n()).collect();
        let act_budgets: Vec<PrivacyBudget> = active.iter().map(|&j| budgets[j]).collect();
        let eps: Vec<f64> = act_budgets.iter().map(|b| b.epsilon()).collect();
        let grid = build_grid(&n, &eps, spec.dim())?;
        let k = grid.len();
        let points: Vec<Vec<f64>> = queries.iter().map(|q| clamp_to_cube(q)).collect();
        let mut session = NoiseSession::new(points.clone(), seed);
        let mut levels = Vec::with_capacity(k);
        for &h in grid.values() {
            let mut stats = Vec::with_capacity(active.len());
            for (a, &j) in active.iter().enumerate() {
                let cal = calibrate(spec, n[a], h, &act_budgets[a], k)?;
                let noise = session.noise(spec, j, h, &cal)?;
                let s = points
                    .iter()
                    .zip(&noise)
                    .map(|(x, z)| Ok(kernel_statistic(&servers[j], spec, h, x)? + z))
                    .collect::<Result<Vec<f64>>>()?;
                stats.push(s);
            }
            levels.push(Level {
                stats,
                coeffs: variance_coefficients(spec, h, &n, &act_budgets, k, config.g_max),
                shares: restricted_weights(h, &n, &eps, k, spec.dim()),
            });
        }
        Ok(Self {
            active,
            total_servers: servers.len(),
            n,
            grid,
            levels,
            points,
            config,
            draws: session.draws(),
        })
    }

    pub fn grid(&self) -> &BandwidthGrid {
        &self.grid
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Number of noise processes drawn while building the session.
    pub fn noise_draws(&self) -> usize {
        self.draws
    }

    /// Original indices of the servers taking part.
    pub fn active_servers(&self) -> &[usize] {
        &self.active
    }

    /// Number of participating sources.
    pub fn m(&self) -> usize {
        self.active.len() - 1
    }

    /// Noisy statistics of the active servers at query `q` and grid index `level`.
    pub fn statistics(&self, q: usize, level: usize) -> Vec<f64> {
        self.levels[level].stats.iter().map(|s| s[q]).collect()
    }

    pub fn variance_coefficients(&self, level: usize) -> &[f64] {
        &self.levels[level].coeffs
    }

    /// Homogeneous index at query `q` and grid index `level`: `(ρ, w_0)`.
    pub fn snr_homog(&self, q: usize, level: usize) -> Result<(f64, f64)> {
        let lv = &self.levels[level];
        let a_tilde = lv.stats[0][q];
        let a = lv.coeffs[0];
        if self.m() == 0 || lv.shares.is_degenerate() {
            return Ok((a_tilde * a_tilde / a, 1.0));
        }
        let shares = lv.shares.shares();
        let b_tilde: f64 = shares.iter().zip(&lv.stats[1..]).map(|(u, s)| u * s[q]).sum();
        let b: f64 = shares.iter().zip(&lv.coeffs[1..]).map(|(u, c)| u * u * c).sum();
        snr_homog_closed(a_tilde, b_tilde, a, b)
    }

    /// Simplex index at query `q` and grid index `level`: `(ρ, w)` over active servers.
    pub fn snr_general(&self, q: usize, level: usize) -> Result<(f64, Vec<f64>)> {
        snr_general_closed(&self.statistics(q, level), &self.levels[level].coeffs)
    }

    /// Index for fixed weights over the active servers.
    pub fn snr_fixed(&self, q: usize, level: usize, w: &[f64]) -> f64 {
        let lv = &self.levels[level];
        let num: f64 = w.iter().zip(&lv.stats).map(|(w, s)| w * s[q]).sum();
        let den: f64 = w.iter().zip(&lv.coeffs).map(|(w, c)| w * w * c).sum();
        num * num / den
    }

    /// Threshold of the selection rule for `policy`.
    pub fn threshold(&self, policy: WeightPolicy) -> f64 {
        let log_size = self.grid.n_star() * self.grid.len() as f64;
        match policy {
            WeightPolicy::Homogeneous => 4.5 * (2.0 * log_size).ln(),
            _ => {
                let m1 = (self.m() + 1) as f64;
                let c = 2.25 * m1;
                match self.config.threshold {
                    ThresholdVariant::Prose => c * (log_size * m1).ln(),
                    ThresholdVariant::Box => c * (2.0 * log_size).ln(),
                }
            }
        }
    }

    fn weights_at(&self, q: usize, level: usize, policy: WeightPolicy) -> Result<(f64, Vec<f64>)> {
        match policy {
            WeightPolicy::Homogeneous => {
                let (rho, w0) = self.snr_homog(q, level)?;
                Ok((rho, self.levels[level].shares.at(w0)))
            }
            WeightPolicy::Simplex => self.snr_general(q, level),
            WeightPolicy::TargetOnly | WeightPolicy::SampleSize => {
                let w = self.fixed_weights(policy);
                Ok((self.snr_fixed(q, level, &w), w))
            }
        }
    }

    fn fixed_weights(&self, policy: WeightPolicy) -> Vec<f64> {
        let mut w = vec![0.0; self.active.len()];
        if policy == WeightPolicy::TargetOnly {
            w[0] = 1.0;
        } else {
            let total: usize = self.n.iter().sum();
            for (w, &n) in w.iter_mut().zip(&self.n) {
                *w = n as f64 / total as f64;
            }
        }
        w
    }

    /// Applies the selection rule at query `q`.
    pub fn select(&self, q: usize, policy: WeightPolicy) -> Result<Selection> {
        let threshold = self.threshold(policy);
        let mut rho = Vec::with_capacity(self.levels.len());
        let mut weights = Vec::with_capacity(self.levels.len());
        for level in 0..self.levels.len() {
            let (r, w) = self.weights_at(q, level, policy)?;
            rho.push(r);
            weights.push(w);
        }
        // Grid is decreasing: the smallest exceeding bandwidth has the largest index.
        let exceeding = (0..rho.len()).rev().find(|&l| rho[l] > threshold);
        let h_index = match exceeding {
            Some(l) => l,
            None => {
                let mut best = 0;
                for l in 1..rho.len() {
                    if rho[l] > rho[best] {
                        best = l;
                    }
                }
                best
            }
        };
        let w = &weights[h_index];
        let value: f64 = w.iter().zip(&self.levels[h_index].stats).map(|(w, s)| w * s[q]).sum();
        let mut full = vec![0.0; self.total_servers];
        for (a, &j) in self.active.iter().enumerate() {
            full[j] = w[a];
        }
        Ok(Selection {
            h: self.grid.values()[h_index],
            h_index,
            weights: full,
            rho,
            threshold,
            exceeded: exceeding.is_some(),
            value,
            label: u8::from(value > 0.0),
        })
    }

    pub fn select_all(&self, policy: WeightPolicy) -> Result<Vec<Selection>> {
        (0..self.points.len()).map(|q| self.select(q, policy)).collect()
    }
}

/// Homogeneous-weight selection at a single point.
pub fn select_bandwidth_homog(
    x0: &[f64],
    servers: &[ServerDataset],
    spec: &KernelSpec,
    budgets: &[PrivacyBudget],
    seed: u64,
    config: AdaptiveConfig,
) -> Result<Selection> {
    AdaptiveSession::new(servers, spec, budgets, &[x0.to_vec()], seed, config)?
        .select(0, WeightPolicy::Homogeneous)
}

/// Simplex-weight selection at a single point.
pub fn select_bandwidth_general(
    x0: &[f64],
    servers: &[ServerDataset],
    spec: &KernelSpec,
    budgets: &[PrivacyBudget],
    seed: u64,
    config: AdaptiveConfig,
) -> Result<Selection> {
    AdaptiveSession::new(servers, spec, budgets, &[x0.to_vec()], seed, config)?
        .select(0, WeightPolicy::Simplex)
}

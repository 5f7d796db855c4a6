//! The non-adaptive weighted classifier.
//!
//! Server `j` computes
//!
//! ```text
//! T_j(x) = (1/(n_j h^d)) Σ_i (Y_i − offset_j) K((X_i − x)/h)
//! ```
//!
//! and releases it with Gaussian-process noise. The target combines the releases
//! with weights `u_j` and predicts class 1 where the combination is non-negative.

use crate::kernels::KernelSpec;
use crate::privacy::{calibrate, NoiseCalibration, NoiseSession, PrivacyBudget};
use crate::rates::{solve_rate_equation, ProblemParams};
use crate::{Error, Result};

/// Labelled sample held by one server. Server 0 is the target.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerDataset {
    server_id: usize,
    dim: usize,
    covariates: Vec<f64>,
    labels: Vec<u8>,
    label_offset: f64,
    // Row indices sorted by the first coordinate, for windowed sums.
    order: Vec<usize>,
    first_sorted: Vec<f64>,
}

impl ServerDataset {
    /// Builds a dataset from rows in `[0, 1]^d` and binary labels.
    pub fn new(server_id: usize, dim: usize, rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Input(format!(
                "server {server_id}: {} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut covariates = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Input(format!(
                    "server {server_id}, row {i}: expected {dim} covariates, got {}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Input(format!(
                    "server {server_id}, row {i}: covariates must lie in [0, 1]"
                )));
            }
            covariates.extend_from_slice(row);
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Input(format!("server {server_id}, row {i}: labels must be 0 or 1")));
        }
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by(|&a, &b| covariates[a * dim].total_cmp(&covariates[b * dim]));
        let first_sorted = order.iter().map(|&i| covariates[i * dim]).collect();
        Ok(Self { server_id, dim, covariates, labels, label_offset: 0.5, order, first_sorted })
    }

    /// Replaces the default offset 1/2 subtracted from each label.
    pub fn with_label_offset(mut self, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::Input("label offset must be finite".into()));
        }
        self.label_offset = offset;
        Ok(self)
    }

    pub fn server_id(&self) -> usize {
        self.server_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_offset(&self) -> f64 {
        self.label_offset
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.point(i).to_vec()).collect()
    }

    /// Indices of rows whose first coordinate lies in `[lo, hi]`.
    fn window(&self, lo: f64, hi: f64) -> &[usize] {
        let a = self.first_sorted.partition_point(|&v| v < lo);
        let b = self.first_sorted.partition_point(|&v| v <= hi);
        &self.order[a..b]
    }
}

/// Projects a point onto `[0, 1]^d`.
pub fn clamp_to_cube(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// `(1/(n h^d)) Σ_i (Y_i − offset) K((X_i − x0)/h)`.
pub fn kernel_statistic(data: &ServerDataset, spec: &KernelSpec, h: f64, x0: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyServer { server: data.server_id });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Input(format!("bandwidth must be positive, got {h}")));
    }
    if x0.len() != data.dim || spec.dim() != data.dim {
        return Err(Error::Input(format!(
            "dimension mismatch: data {}, kernel {}, query {}",
            data.dim,
            spec.dim(),
            x0.len()
        )));
    }
    Ok(kernel_sum(data, spec, h, x0) / (data.n() as f64 * h.powi(data.dim as i32)))
}

/// Unnormalised kernel sum; inputs already validated.
pub(crate) fn kernel_sum(data: &ServerDataset, spec: &KernelSpec, h: f64, x0: &[f64]) -> f64 {
    let term = |i: usize| (data.labels[i] as f64 - data.label_offset) * spec.eval_scaled(data.point(i), x0, h);
    match spec.support_radius() {
        Some(radius) => {
            let reach = radius * h;
            data.window(x0[0] - reach, x0[0] + reach).iter().map(|&i| term(i)).sum()
        }
        None => (0..data.n()).map(term).sum(),
    }
}

/// Convex combination weights over the `m + 1` servers, target first.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferWeights(Vec<f64>);

impl TransferWeights {
    /// Normalises non-negative weights to sum to one.
    pub fn from_unnormalized(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Input("at least one weight is required".into()));
        }
        if v.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Input("weights must be finite and non-negative".into()));
        }
        let total: f64 = v.iter().sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("weights sum to zero".into()));
        }
        Ok(Self(v.into_iter().map(|w| w / total).collect()))
    }

    /// All mass on the target.
    pub fn target_only(m: usize) -> Self {
        let mut v = vec![0.0; m + 1];
        v[0] = 1.0;
        Self(v)
    }

    /// Weights proportional to sample sizes.
    pub fn proportional(sizes: &[usize]) -> Result<Self> {
        Self::from_unnormalized(sizes.iter().map(|&n| n as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `u_j ∝ (n_j ∧ n_j² ε_j² h^d) h^(γ_j β)`, with the target's exponent `γ_0 = 1`.
pub fn theoretical_weights(
    n: &[usize],
    eps: &[f64],
    gamma: &[f64],
    beta: f64,
    d: usize,
    h: f64,
) -> Result<TransferWeights> {
    if n.len() != eps.len() || n.len() != gamma.len() + 1 {
        return Err(Error::Input(format!(
            "expected m + 1 sizes and budgets and m exponents, got {}, {}, {}",
            n.len(),
            eps.len(),
            gamma.len()
        )));
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Input(format!("bandwidth must lie in (0, 1], got {h}")));
    }
    if n.contains(&0) {
        return Err(Error::Input("every sample size must be at least 1".into()));
    }
    let hd = h.powi(d as i32);
    let v = (0..n.len())
        .map(|j| {
            let nj = n[j] as f64;
            let g = if j == 0 { 1.0 } else { gamma[j - 1] };
            let precision = if eps[j].is_infinite() { nj } else { nj.min(nj * nj * eps[j] * eps[j] * hd) };
            precision * h.powf(g * beta)
        })
        .collect();
    TransferWeights::from_unnormalized(v)
}

/// The weighted, privatised statistic at a set of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateEvaluation {
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// Weights actually applied, after dropping empty servers.
    pub weights: TransferWeights,
    /// Noise calibration per server; `None` for servers that were dropped or carry no weight.
    pub calibrations: Vec<Option<NoiseCalibration>>,
    pub seed: u64,
}

/// Drops empty servers and renormalises the remaining weights.
pub(crate) fn effective_weights(servers: &[ServerDataset], weights: &TransferWeights) -> Result<TransferWeights> {
    if weights.len() != servers.len() {
        return Err(Error::Input(format!(
            "{} weights for {} servers",
            weights.len(),
            servers.len()
        )));
    }
    let v = servers
        .iter()
        .zip(weights.as_slice())
        .map(|(s, &w)| if s.is_empty() { 0.0 } else { w })
        .collect();
    TransferWeights::from_unnormalized(v)
        .map_err(|_| Error::Degenerate("every server with positive weight is empty".into()))
}

/// `Σ_j u_j (T_j(x_q) + σ_j ξ_j(x_q))` at every query point.
///
/// Queries are clamped to the unit cube. Each server's noise is one joint draw
/// over all queries, with a per-server stream derived from `seed`.
pub fn private_weighted_statistic(
    servers: &[ServerDataset],
    spec: &KernelSpec,
    h: f64,
    weights: &TransferWeights,
    budgets: &[PrivacyBudget],
    queries: &[Vec<f64>],
    seed: u64,
) -> Result<PrivateEvaluation> {
    if budgets.len() != servers.len() {
        return Err(Error::Input(format!("{} budgets for {} servers", budgets.len(), servers.len())));
    }
    let weights = effective_weights(servers, weights)?;
    let points: Vec<Vec<f64>> = queries.iter().map(|q| clamp_to_cube(q)).collect();
    let mut session = NoiseSession::new(points, seed);
    let mut values = vec![0.0; queries.len()];
    let mut calibrations = vec![None; servers.len()];
    for (j, server) in servers.iter().enumerate() {
        let u = weights.as_slice()[j];
        if u == 0.0 {
            continue;
        }
        let cal = calibrate(spec, server.n(), h, &budgets[j], 1)?;
        let noise = session.noise(spec, j, h, &cal)?;
        for (q, x) in session.points().iter().enumerate() {
            values[q] += u * (kernel_statistic(server, spec, h, x)? + noise[q]);
        }
        calibrations[j] = Some(cal);
    }
    Ok(PrivateEvaluation { values, bandwidth: h, weights, calibrations, seed })
}

/// Class 1 where the statistic is non-negative.
pub fn classify(evaluation: &PrivateEvaluation) -> Vec<u8> {
    evaluation.values.iter().map(|&v| u8::from(v >= 0.0)).collect()
}

/// Bandwidth solving the rate equation with right-hand side `log(2/δ_min)`.
pub fn solve_h_opt_delta(
    n: &[usize],
    eps: &[f64],
    gamma: &[f64],
    beta: f64,
    d: usize,
    delta_min: f64,
) -> Result<f64> {
    if !(delta_min > 0.0 && delta_min < 2.0) {
        return Err(Error::Input(format!("delta_min must lie in (0, 2), got {delta_min}")));
    }
    let params = ProblemParams::new(
        n.iter().map(|&v| v as f64).collect(),
        eps.to_vec(),
        gamma.to_vec(),
        beta,
        0.0,
        d,
    )?;
    Ok(solve_rate_equation(&params, (2.0 / delta_min).ln())?.r)
}

/// The minimax classifier with theoretical bandwidth and weights.
///
/// `gamma` holds the source exponents; the bandwidth uses the smallest positive δ.
pub fn minimax_classify(
    servers: &[ServerDataset],
    spec: &KernelSpec,
    budgets: &[PrivacyBudget],
    gamma: &[f64],
    beta: f64,
    queries: &[Vec<f64>],
    seed: u64,
) -> Result<(Vec<u8>, PrivateEvaluation)> {
    let n: Vec<usize> = servers.iter().map(|s| s.n().max(1)).collect();
    let eps: Vec<f64> = budgets.iter().map(|b| b.epsilon()).collect();
    let delta_min = budgets
        .iter()
        .filter(|b| !b.is_public())
        .map(|b| b.delta())
        .fold(1.0, f64::min);
    let h = solve_h_opt_delta(&n, &eps, gamma, beta, spec.dim(), delta_min)?;
    let w = theoretical_weights(&n, &eps, gamma, beta, spec.dim(), h)?;
    let eval = private_weighted_statistic(servers, spec, h, &w, budgets, queries, seed)?;
    Ok((classify(&eval), eval))
}

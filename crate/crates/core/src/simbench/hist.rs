//! Privatised histogram baseline.
//!
//! Each server bins its sample on a regular grid of width `h`, releases the
//! per-bin statistic `(1/(n h^d)) Σ (Y − offset) 1(X ∈ b)` with independent
//! Gaussian noise, and the target combines the releases with weight `w` on
//! itself and `(1 − w)/m` on every source.

use rand_distr::{Distribution, StandardNormal};

use crate::classifier::{clamp_to_cube, ServerDataset};
use crate::privacy::PrivacyBudget;
use crate::{seed, Error, Result};

/// Per-bin noise standard deviation of the Gaussian mechanism at sensitivity `1/(n h^d)`.
pub fn hist_noise_sd(n: usize, h: f64, d: usize, budget: &PrivacyBudget) -> Result<f64> {
    if n == 0 {
        return Err(Error::Input("cannot calibrate noise for an empty server".into()));
    }
    if budget.is_public() {
        return Ok(0.0);
    }
    let sensitivity = 1.0 / (n as f64 * h.powi(d as i32));
    Ok(sensitivity * (2.0 * (2.0 / budget.delta()).ln()).sqrt() / budget.epsilon())
}

/// Noisy histograms of every server on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRelease {
    h: f64,
    bins_per_axis: usize,
    /// `[server][bin]`.
    values: Vec<Vec<f64>>,
}

impl HistogramRelease {
    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn bins_per_axis(&self) -> usize {
        self.bins_per_axis
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Flat index of the bin containing `x` (after clamping to the cube).
    pub fn bin_of(&self, x: &[f64]) -> usize {
        let k = self.bins_per_axis;
        clamp_to_cube(x)
            .iter()
            .rev()
            .fold(0, |acc, &v| acc * k + ((v * k as f64).floor() as usize).min(k - 1))
    }

    /// `w T_0(b) + ((1 − w)/m) Σ_j T_j(b)` at the bin of `x`.
    pub fn combine(&self, w: f64, x: &[f64]) -> f64 {
        let b = self.bin_of(x);
        let m = self.values.len() - 1;
        if m == 0 {
            return self.values[0][b];
        }
        let sources: f64 = self.values[1..].iter().map(|v| v[b]).sum();
        w * self.values[0][b] + (1.0 - w) / m as f64 * sources
    }
}

/// Releases every server's histogram at bin width `h = 2^(−i)`.
pub fn release_histograms(
    servers: &[ServerDataset],
    h: f64,
    budgets: &[PrivacyBudget],
    seed: u64,
) -> Result<HistogramRelease> {
    if servers.is_empty() || budgets.len() != servers.len() {
        return Err(Error::Input("one budget per server is required".into()));
    }
    let k = (1.0 / h).round();
    if !(h > 0.0 && h <= 1.0) || (k * h - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!("bin width must tile the unit cube, got {h}")));
    }
    let bins_per_axis = k as usize;
    let dim = servers[0].dim();
    let total_bins = bins_per_axis.pow(dim as u32);
    let mut release = HistogramRelease { h, bins_per_axis, values: Vec::with_capacity(servers.len()) };
    for (j, server) in servers.iter().enumerate() {
        if server.is_empty() {
            return Err(Error::EmptyServer { server: server.server_id() });
        }
        let scale = 1.0 / (server.n() as f64 * h.powi(dim as i32));
        let mut v = vec![0.0; total_bins];
        for i in 0..server.n() {
            v[release.bin_of(server.point(i))] += (server.label(i) as f64 - server.label_offset()) * scale;
        }
        let sd = hist_noise_sd(server.n(), h, dim, &budgets[j])?;
        if sd > 0.0 {
            let mut rng = seed::rng(seed::derive(seed, &[j as u64]));
            for b in v.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *b += sd * z;
            }
        }
        release.values.push(v);
    }
    Ok(release)
}

/// Histogram classifier: class 1 where the combined bin statistic is non-negative.
pub fn dt_hist_classifier(
    servers: &[ServerDataset],
    h: f64,
    w: f64,
    budgets: &[PrivacyBudget],
    queries: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<u8>> {
    let release = release_histograms(servers, h, budgets, seed)?;
    Ok(queries.iter().map(|x| u8::from(release.combine(w, x) >= 0.0)).collect())
}

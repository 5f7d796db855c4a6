use clap::Args;
use dptransfer::rates::{
    classify_regime, rate_curve, write_curve_csv, write_endpoints_csv, write_phase_csv, HomogeneousParams,
};

use crate::config::Settings;
use crate::output::Output;
use crate::{flag_layer, resolve, CommonArgs, Failure};

pub const DEFAULTS: &[(&str, &str)] = &[
    ("n0", "1000"),
    ("m", "50"),
    ("n", "200"),
    ("gamma", "4"),
    ("beta", "0.25"),
    ("alpha", "1"),
    ("d", "2"),
    ("delta", "1e-6"),
    ("eps_min", "1e-5"),
    ("eps_max", "1"),
    ("eps_points", "200"),
    ("eps", ""),
    ("phase_gammas", ""),
    ("seed", "0"),
];

#[derive(Args, Debug)]
pub struct RatesArgs {
    /// Target sample size.
    #[arg(long)]
    n0: Option<String>,
    /// Number of sources (0 for a single server).
    #[arg(long)]
    m: Option<String>,
    /// Sample size of each source.
    #[arg(long)]
    n: Option<String>,
    /// Transfer exponent of the sources.
    #[arg(long)]
    gamma: Option<String>,
    /// Smoothness exponent.
    #[arg(long)]
    beta: Option<String>,
    /// Margin exponent.
    #[arg(long)]
    alpha: Option<String>,
    /// Covariate dimension.
    #[arg(long)]
    d: Option<String>,
    /// δ used by the logarithmic inflation factor.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    eps_min: Option<String>,
    #[arg(long)]
    eps_max: Option<String>,
    /// Number of log-spaced grid points.
    #[arg(long)]
    eps_points: Option<String>,
    /// Explicit ε list; replaces the log grid.
    #[arg(long)]
    eps: Option<String>,
    /// γ values for a phase-diagram table over the ε grid.
    #[arg(long)]
    phase_gammas: Option<String>,
}

impl RatesArgs {
    fn layer(&self) -> Vec<(String, String)> {
        flag_layer(&[
            ("n0", self.n0.clone()),
            ("m", self.m.clone()),
            ("n", self.n.clone()),
            ("gamma", self.gamma.clone()),
            ("beta", self.beta.clone()),
            ("alpha", self.alpha.clone()),
            ("d", self.d.clone()),
            ("delta", self.delta.clone()),
            ("eps_min", self.eps_min.clone()),
            ("eps_max", self.eps_max.clone()),
            ("eps_points", self.eps_points.clone()),
            ("eps", self.eps.clone()),
            ("phase_gammas", self.phase_gammas.clone()),
        ])
    }
}

fn params(s: &Settings) -> Result<HomogeneousParams, Failure> {
    let p = HomogeneousParams {
        n0: s.parse("n0")?,
        m: s.parse("m")?,
        n: s.parse("n")?,
        eps0: 1.0,
        eps: 1.0,
        gamma: s.parse("gamma")?,
        beta: s.parse("beta")?,
        alpha: s.parse("alpha")?,
        d: s.parse("d")?,
    };
    p.to_problem()?;
    Ok(p)
}

/// Log-spaced grid from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect();
    g[0] = lo;
    g[points - 1] = hi;
    g
}

fn grid(s: &Settings) -> Result<Vec<f64>, Failure> {
    let explicit: Vec<f64> = s.list("eps")?;
    let grid = if explicit.is_empty() {
        let (lo, hi): (f64, f64) = (s.parse("eps_min")?, s.parse("eps_max")?);
        let points: usize = s.parse("eps_points")?;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) || points == 0 {
            return Err(Failure::Config(format!(
                "the ε grid needs 0 < eps_min ≤ eps_max < ∞ and eps_points ≥ 1, got [{lo}, {hi}] with {points} points"
            )));
        }
        log_grid(lo, hi, points)
    } else {
        explicit
    };
    if let Some(bad) = grid.iter().find(|e| !(**e > 0.0)) {
        return Err(Failure::Config(format!("ε values must be positive, got {bad}")));
    }
    Ok(grid)
}

pub fn run(common: &CommonArgs, args: &RatesArgs) -> Result<(), Failure> {
    let settings = resolve(DEFAULTS, None, common, args.layer())?;
    let p = params(&settings)?;
    let delta: f64 = settings.parse("delta")?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Failure::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    let eps = grid(&settings)?;
    let phase_gammas: Vec<f64> = settings.list("phase_gammas")?;
    if let Some(bad) = phase_gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Failure::Config(format!("phase_gammas must be positive, got {bad}")));
    }

    let mut notes = vec![format!(
        "rate_log_inflated multiplies the rate by L_N = max(1, ln(1/delta))^(beta(1+alpha)/(2beta*min(gamma,1)+d)) \
         with delta = {delta}; an upper-order bound, not a tight constant"
    )];
    let endpoints = if p.m == 0 {
        notes.push("single server (m = 0): no phase-diagram endpoints; regime is the dominant rate term".into());
        None
    } else {
        if let Err(e) = classify_regime(&HomogeneousParams { eps0: eps[0], eps: eps[0], ..p }) {
            eprintln!("dptransfer: warning: {e}; regimes fall back to the dominant rate term");
            notes.push(format!("{e}; regimes are the dominant rate term and the endpoints are informational"));
        }
        Some(p.endpoints())
    };

    let out = Output::create(&common.out, "rates", &settings)?;
    let curve = rate_curve(&p, &eps, delta);
    out.csv("rate_curve.csv", &notes, |w| write_curve_csv(w, &curve, endpoints.as_ref()))?;
    out.csv("regime_boundaries.csv", &notes[1..], |w| write_endpoints_csv(w, endpoints.as_ref()))?;
    if !phase_gammas.is_empty() {
        let mut cells = Vec::with_capacity(phase_gammas.len() * eps.len());
        for &gamma in &phase_gammas {
            let curve = rate_curve(&HomogeneousParams { gamma, ..p }, &eps, delta);
            cells.extend(curve.into_iter().map(|c| (c.epsilon, gamma, c.regime)));
        }
        out.csv("phase_diagram.csv", &notes[1..], |w| write_phase_csv(w, &cells))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_hits_both_ends() {
        let g = log_grid(1e-4, 1.0, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[4] - 1.0).abs() < 1e-15);
        assert!((g[2] - 1e-2).abs() < 1e-15);
    }
}

//! Rate calculator.
//!
//! The minimax excess risk is governed by the root `r` of
//!
//! ```text
//! Σ_j (n_j ∧ n_j² ε_j² r^d) · r^(2 β γ_j + d) = rhs,      γ_0 = 1, rhs = 1,
//! ```
//!
//! and equals `r^(β(1+α))` up to logarithmic factors. Each summand is the
//! precision of one server: its sample size, or its privatised counterpart
//! when the privacy noise dominates. The left-hand side is continuous and
//! strictly increasing from 0 to ∞, so the root is found by bisection on `log r`.
//!
//! For exchangeable sources the rate has the closed form of
//! [`homogeneous_rate`], and [`classify_regime`] names the term that governs it:
//! non-private or private, target or source.

use std::fmt;
use std::io::Write;

use crate::{Error, Result};

/// Inputs of the rate equation for `m` sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    /// Sample sizes, target first (`m + 1` entries).
    pub n: Vec<f64>,
    /// Privacy budgets, target first; `f64::INFINITY` for a public server.
    pub eps: Vec<f64>,
    /// Relative signal exponents of the `m` sources.
    pub gamma: Vec<f64>,
    pub beta: f64,
    pub alpha: f64,
    pub d: usize,
}

impl ProblemParams {
    pub fn new(
        n: Vec<f64>,
        eps: Vec<f64>,
        gamma: Vec<f64>,
        beta: f64,
        alpha: f64,
        d: usize,
    ) -> Result<Self> {
        let p = Self { n, eps, gamma, beta, alpha, d };
        p.validate()?;
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.gamma.len();
        if self.n.len() != m + 1 || self.eps.len() != m + 1 {
            return Err(Error::Input(format!(
                "expected {} sample sizes and budgets for {m} sources, got {} and {}",
                m + 1,
                self.n.len(),
                self.eps.len()
            )));
        }
        if self.d == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Input(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Input(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if self.alpha * self.beta > self.d as f64 {
            return Err(Error::Input("the margin and smoothness must satisfy αβ ≤ d".into()));
        }
        if self.n.iter().any(|&n| !(n >= 1.0 && n.is_finite())) {
            return Err(Error::Input("every sample size must be at least 1".into()));
        }
        if self.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Input("every epsilon must be positive".into()));
        }
        if self.gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::Input("every relative signal exponent must be positive".into()));
        }
        Ok(())
    }

    fn exponent(&self, j: usize) -> f64 {
        let g = if j == 0 { 1.0 } else { self.gamma[j - 1] };
        2.0 * self.beta * g + self.d as f64
    }

    /// `n_j ∧ n_j² ε_j² r^d`.
    pub fn precision(&self, j: usize, r: f64) -> f64 {
        let n = self.n[j];
        let e = self.eps[j];
        if e.is_infinite() {
            n
        } else {
            n.min(n * n * e * e * r.powi(self.d as i32))
        }
    }

    /// Left-hand side of the rate equation.
    pub fn lhs(&self, r: f64) -> f64 {
        (0..self.n.len()).map(|j| self.precision(j, r) * r.powf(self.exponent(j))).sum()
    }

    /// `β(1+α)`.
    pub fn risk_exponent(&self) -> f64 {
        self.beta * (1.0 + self.alpha)
    }

    fn as_homogeneous(&self) -> Option<HomogeneousParams> {
        let m = self.m();
        if m == 0 {
            return Some(HomogeneousParams {
                n0: self.n[0],
                m: 0,
                n: 1.0,
                eps0: self.eps[0],
                eps: self.eps[0],
                gamma: 1.0,
                beta: self.beta,
                alpha: self.alpha,
                d: self.d,
            });
        }
        let same = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        if same(&self.n[1..]) && same(&self.eps[1..]) && same(&self.gamma) {
            Some(HomogeneousParams {
                n0: self.n[0],
                m,
                n: self.n[1],
                eps0: self.eps[0],
                eps: self.eps[1],
                gamma: self.gamma[0],
                beta: self.beta,
                alpha: self.alpha,
                d: self.d,
            })
        } else {
            None
        }
    }
}

/// Which of the four candidate rates governs the excess risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Privacy so strict that random guessing is optimal.
    Trivial,
    /// Non-private target rate.
    NPt,
    /// Private target rate.
    Pt,
    /// Non-private source rate.
    NPs,
    /// Private source rate.
    Ps,
    /// Heterogeneous sources: no single named term.
    Mixed,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Trivial => "Trivial",
            Regime::NPt => "NPt",
            Regime::Pt => "Pt",
            Regime::NPs => "NPs",
            Regime::Ps => "Ps",
            Regime::Mixed => "Mixed",
        })
    }
}

/// Phase-diagram endpoints for exchangeable sources with a common budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoints {
    /// Below this budget every classifier is no better than a coin flip.
    pub eps1: f64,
    /// Private and non-private target rates cross.
    pub eps2: f64,
    /// Private and non-private source rates cross.
    pub eps3: f64,
    /// Private target and private source rates cross.
    pub eps11: f64,
    /// Non-private target and private source rates cross.
    pub eps21: f64,
    /// Non-private target and non-private source rates cross.
    pub gamma_star: f64,
}

impl Endpoints {
    pub fn to_pairs(&self) -> [(&'static str, f64); 6] {
        [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps3", self.eps3),
            ("eps11", self.eps11),
            ("eps21", self.eps21),
            ("gamma_star", self.gamma_star),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSolution {
    /// The bandwidth scale `min(root, 1)`.
    pub r: f64,
    /// The exact root of the equation, possibly above 1.
    pub root: f64,
    /// True when the root exceeded 1 and `r` was clamped.
    pub clamped: bool,
    /// `r^(β(1+α))`, the excess risk before logarithmic factors.
    pub excess_risk: f64,
    /// `|lhs(root) − rhs| / rhs`.
    pub residual: f64,
    pub regime: Regime,
    pub endpoints: Option<Endpoints>,
}

const MAX_ITER: usize = 200;
const LOG_TOL: f64 = 1e-14;

/// Solves the rate equation with right-hand side `rhs`.
pub fn solve_rate_equation(params: &ProblemParams, rhs: f64) -> Result<RateSolution> {
    params.validate()?;
    if !(rhs > 0.0 && rhs.is_finite()) {
        return Err(Error::Input(format!("right-hand side must be positive, got {rhs}")));
    }
    let mut lo = f64::MIN_POSITIVE.powf(0.25).ln();
    let mut hi = 0.0_f64;
    if params.lhs(lo.exp()) >= rhs {
        return Err(Error::Numerical("root lies below the smallest representable bracket".into()));
    }
    while params.lhs(hi.exp()) < rhs {
        lo = hi;
        hi += std::f64::consts::LN_2;
        if hi > 700.0 {
            return Err(Error::Numerical("root lies above the largest representable bracket".into()));
        }
    }
    for _ in 0..MAX_ITER {
        if hi - lo <= LOG_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if params.lhs(mid.exp()) < rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = (0.5 * (lo + hi)).exp();
    let residual = (params.lhs(root) - rhs).abs() / rhs;
    let r = root.min(1.0);
    let (regime, endpoints) = match params.as_homogeneous() {
        Some(hp) if hp.m == 0 => (hp.dominant_term(), None),
        Some(hp) => match classify_regime(&hp) {
            Ok(c) => (c.regime, Some(c.endpoints)),
            Err(_) => (hp.dominant_term(), None),
        },
        None => (Regime::Mixed, None),
    };
    Ok(RateSolution {
        r,
        root,
        clamped: root > 1.0,
        excess_risk: r.powf(params.risk_exponent()),
        residual,
        regime,
        endpoints,
    })
}

/// Exchangeable sources: `m` servers of size `n`, budget `eps` and exponent `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousParams {
    pub n0: f64,
    pub m: usize,
    pub n: f64,
    pub eps0: f64,
    pub eps: f64,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub d: usize,
}

/// The four candidate rates; `None` for the source terms when `m = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourTerms {
    pub np_target: f64,
    pub p_target: f64,
    pub np_source: Option<f64>,
    pub p_source: Option<f64>,
}

impl HomogeneousParams {
    pub fn to_problem(&self) -> Result<ProblemParams> {
        let m = self.m;
        let mut n = vec![self.n0];
        n.extend(std::iter::repeat_n(self.n, m));
        let mut eps = vec![self.eps0];
        eps.extend(std::iter::repeat_n(self.eps, m));
        ProblemParams::new(n, eps, vec![self.gamma; m], self.beta, self.alpha, self.d)
    }

    fn k(&self) -> f64 {
        self.beta * (1.0 + self.alpha)
    }

    fn d(&self) -> f64 {
        self.d as f64
    }

    /// `n_0^(1/(2β+d)) ∧ (n_0² ε_0²)^(1/(2β+2d))`.
    fn target_scale(&self) -> f64 {
        let (b, d) = (self.beta, self.d());
        let np = self.n0.powf(1.0 / (2.0 * b + d));
        let p = (self.n0 * self.n0 * self.eps0 * self.eps0).powf(1.0 / (2.0 * b + 2.0 * d));
        np.min(p)
    }

    /// `(mn)^(1/(2βγ+d)) ∧ (mn² ε²)^(1/(2βγ+2d))`, zero without sources.
    fn source_scale(&self) -> f64 {
        if self.m == 0 {
            return 0.0;
        }
        let (b, d, g, m) = (self.beta, self.d(), self.gamma, self.m as f64);
        let np = (m * self.n).powf(1.0 / (2.0 * b * g + d));
        let p = (m * self.n * self.n * self.eps * self.eps).powf(1.0 / (2.0 * b * g + 2.0 * d));
        np.min(p)
    }

    /// The rate before capping at 1.
    fn raw_rate(&self) -> f64 {
        (self.target_scale() + self.source_scale()).powf(-self.k())
    }

    pub fn four_terms(&self) -> FourTerms {
        let (b, d, k) = (self.beta, self.d(), self.k());
        let np_target = self.n0.powf(-k / (2.0 * b + d));
        let p_target = (self.n0 * self.n0 * self.eps0 * self.eps0).powf(-k / (2.0 * b + 2.0 * d));
        let (np_source, p_source) = if self.m == 0 {
            (None, None)
        } else {
            let (g, m) = (self.gamma, self.m as f64);
            (
                Some((m * self.n).powf(-k / (2.0 * b * g + d))),
                Some((m * self.n * self.n * self.eps * self.eps).powf(-k / (2.0 * b * g + 2.0 * d))),
            )
        };
        FourTerms { np_target, p_target, np_source, p_source }
    }

    /// `[(NPt ∨ Pt) ∧ (NPs ∨ Ps)] ∧ 1`, the min-of-four form of the rate.
    pub fn rate_four_term(&self) -> f64 {
        let t = self.four_terms();
        let target = t.np_target.max(t.p_target);
        let source = match (t.np_source, t.p_source) {
            (Some(a), Some(b)) => a.max(b),
            _ => f64::INFINITY,
        };
        target.min(source).min(1.0)
    }

    /// The term attaining the min/max structure of [`Self::rate_four_term`].
    pub fn dominant_term(&self) -> Regime {
        let t = self.four_terms();
        let target = t.np_target.max(t.p_target);
        let source = match (t.np_source, t.p_source) {
            (Some(a), Some(b)) => a.max(b),
            _ => f64::INFINITY,
        };
        if target.min(source) >= 1.0 {
            Regime::Trivial
        } else if target <= source {
            if t.p_target >= t.np_target {
                Regime::Pt
            } else {
                Regime::NPt
            }
        } else if t.p_source >= t.np_source {
            Regime::Ps
        } else {
            Regime::NPs
        }
    }

    /// `L_N = (log(1/δ))^(β(1+α)/(2β(γ∧1)+d))`, an upper-order logarithmic factor.
    pub fn log_factor(&self, delta: f64) -> f64 {
        let g = if self.m == 0 { 1.0 } else { self.gamma.min(1.0) };
        (1.0 / delta).ln().max(1.0).powf(self.k() / (2.0 * self.beta * g + self.d()))
    }

    /// `[L_N · {…}^(−β(1+α))] ∧ 1`.
    pub fn rate_with_log_factor(&self, delta: f64) -> f64 {
        (self.log_factor(delta) * self.raw_rate()).min(1.0)
    }

    pub fn endpoints(&self) -> Endpoints {
        let (b, d, g) = (self.beta, self.d(), self.gamma);
        let m = self.m as f64;
        let (n0, n) = (self.n0, self.n);
        let sqrt_mn = m.sqrt() * n;
        let gamma_star = ((2.0 * b + d) * (m * n).ln() / n0.ln() - d) / (2.0 * b);
        let eps1 = (1.0 / sqrt_mn).min(1.0 / n0);
        let eps2 = n0.powf(-b / (2.0 * b + d));
        let eps3 = (m.powf(d / 2.0) * n.powf(-b * g)).powf(1.0 / (2.0 * b * g + d));
        let eps11 = if g != 1.0 {
            let log = ((b + d) * sqrt_mn.ln() - (b * g + d) * n0.ln()) / (b * (g - 1.0));
            log.exp()
        } else if n0 <= sqrt_mn {
            eps1
        } else {
            eps2
        };
        let eps21 = n0.powf((b * g + d) / (2.0 * b + d)) / sqrt_mn;
        Endpoints { eps1, eps2, eps3, eps11, eps21, gamma_star }
    }
}

/// `min(1, [ (n_0^(1/(2β+d)) ∧ (n_0²ε_0²)^(1/(2β+2d))) + ((mn)^(1/(2βγ+d)) ∧ (mn²ε²)^(1/(2βγ+2d))) ]^(−β(1+α)))`.
pub fn homogeneous_rate(p: &HomogeneousParams) -> f64 {
    p.raw_rate().min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeClassification {
    pub regime: Regime,
    pub endpoints: Endpoints,
}

/// Locates `(ε, γ)` in the phase diagram of exchangeable sources.
///
/// Requires `n ≤ n_0 ≤ mn` and a budget shared by every server. Columns are
/// the half-open budget intervals `(0, ε1]`, `(ε1, ε2]`, `(ε2, ε3]`, `(ε3, ∞)`
/// and rows the exponent intervals `(0, 1]`, `(1, γ*]`, `(γ*, ∞)`.
///
/// In the `(ε2, ε3]` column the source rate is still the private one, so for
/// `γ ≤ γ*` the governing term switches from NPt to Ps at `ε21`; this holds
/// for `γ ≤ 1` as well as for `1 < γ ≤ γ*`.
pub fn classify_regime(p: &HomogeneousParams) -> Result<RegimeClassification> {
    if p.m == 0 {
        return Err(Error::Scope("the phase diagram needs at least one source".into()));
    }
    let mn = p.m as f64 * p.n;
    if !(p.n <= p.n0 && p.n0 <= mn) {
        return Err(Error::Scope(format!(
            "the phase diagram assumes n ≤ n0 ≤ mn, got n = {}, n0 = {}, mn = {mn}",
            p.n, p.n0
        )));
    }
    if p.eps0 != p.eps {
        return Err(Error::Scope("the phase diagram assumes one budget for every server".into()));
    }
    if p.n0 <= 1.0 {
        return Err(Error::Scope("the phase diagram needs n0 > 1".into()));
    }
    let e = p.endpoints();
    let (eps, g) = (p.eps, p.gamma);
    let regime = if eps <= e.eps1 {
        Regime::Trivial
    } else if eps <= e.eps2 {
        match (g <= 1.0, eps <= e.eps11) {
            (true, true) => Regime::Pt,
            (true, false) => Regime::Ps,
            (false, true) => Regime::Ps,
            (false, false) => Regime::Pt,
        }
    } else if eps <= e.eps3 {
        if g <= e.gamma_star {
            if eps <= e.eps21 {
                Regime::NPt
            } else {
                Regime::Ps
            }
        } else {
            Regime::NPt
        }
    } else if g <= e.gamma_star {
        Regime::NPs
    } else {
        Regime::NPt
    };
    Ok(RegimeClassification { regime, endpoints: e })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub rate: f64,
    pub log_rate: f64,
    /// Rate inflated by the logarithmic factor `L_N`; an upper-order bound.
    pub rate_log_inflated: f64,
    pub regime: Regime,
}

/// The homogeneous rate as a function of a budget shared by every server.
pub fn rate_curve(template: &HomogeneousParams, eps_grid: &[f64], delta: f64) -> Vec<CurvePoint> {
    eps_grid
        .iter()
        .map(|&eps| {
            let p = HomogeneousParams { eps0: eps, eps, ..*template };
            let rate = homogeneous_rate(&p);
            let regime = if p.m == 0 {
                p.dominant_term()
            } else {
                classify_regime(&p).map(|c| c.regime).unwrap_or_else(|_| p.dominant_term())
            };
            CurvePoint {
                epsilon: eps,
                rate,
                log_rate: rate.ln(),
                rate_log_inflated: p.rate_with_log_factor(delta),
                regime,
            }
        })
        .collect()
}

/// Rate curve for heterogeneous parameters: every finite budget is replaced
/// by the grid value and the rate equation solved.
pub fn rate_curve_general(params: &ProblemParams, eps_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    eps_grid
        .iter()
        .map(|&eps| {
            let mut p = params.clone();
            for e in p.eps.iter_mut().filter(|e| e.is_finite()) {
                *e = eps;
            }
            let sol = solve_rate_equation(&p, 1.0)?;
            Ok(CurvePoint {
                epsilon: eps,
                rate: sol.excess_risk,
                log_rate: sol.excess_risk.ln(),
                rate_log_inflated: sol.excess_risk,
                regime: sol.regime,
            })
        })
        .collect()
}

/// Writes a rate curve; the endpoint columns are empty when `endpoints` is `None`.
pub fn write_curve_csv<W: Write>(out: W, curve: &[CurvePoint], endpoints: Option<&Endpoints>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["epsilon", "rate", "log_rate", "regime", "rate_log_inflated"];
    header.extend(["eps1", "eps2", "eps3", "eps11", "eps21", "gamma_star"]);
    w.write_record(&header)?;
    for c in curve {
        let mut rec = vec![
            c.epsilon.to_string(),
            c.rate.to_string(),
            c.log_rate.to_string(),
            c.regime.to_string(),
            c.rate_log_inflated.to_string(),
        ];
        match endpoints {
            Some(e) => rec.extend(e.to_pairs().iter().map(|(_, v)| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per endpoint: `endpoint,value`.
pub fn write_endpoints_csv<W: Write>(out: W, endpoints: Option<&Endpoints>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["endpoint", "value"])?;
    if let Some(e) = endpoints {
        for (name, v) in e.to_pairs() {
            w.write_record([name.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// The regime at every `(ε, γ)` pair of a grid: `epsilon,gamma,regime`.
pub fn write_phase_csv<W: Write>(out: W, cells: &[(f64, f64, Regime)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "gamma", "regime"])?;
    for (eps, gamma, regime) in cells {
        w.write_record([eps.to_string(), gamma.to_string(), regime.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Which case of the one-public-source setting applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PublicSourceCase {
    /// `n_1 > n_2`: the public server alone sets the rate.
    PublicDominant,
    /// `n_0^((2βγ+d)/(2β+d)) ≤ n_1 ≤ n_2`, budget small enough that the public server wins.
    PublicOverPrivate,
    /// Same sizes, the private source at its private rate.
    PrivateSourcePrivate,
    /// Same sizes, the private source at its non-private rate.
    PrivateSourceNonPrivate,
    /// `n_1 < n_0^((2βγ+d)/(2β+d))` and the public server still has the largest scale.
    SmallPublicDominant,
    /// `n_1 < n_0^((2βγ+d)/(2β+d))`; target and private source combine.
    TargetAndPrivateSource,
}

/// Rate with one public source (`ε_1 = ∞`) and one private source sharing the
/// target's budget, both with exponent `gamma`. Requires `n_2 > n_0^((2βγ+d)/(2β+d))`.
#[allow(clippy::too_many_arguments)]
pub fn public_source_rate(
    n0: f64,
    n1: f64,
    n2: f64,
    eps: f64,
    gamma: f64,
    beta: f64,
    alpha: f64,
    d: usize,
) -> Result<(f64, PublicSourceCase)> {
    ProblemParams::new(
        vec![n0, n1, n2],
        vec![eps, f64::INFINITY, eps],
        vec![gamma, gamma],
        beta,
        alpha,
        d,
    )?;
    let (b, g, df, k) = (beta, gamma, d as f64, beta * (1.0 + alpha));
    let src = 2.0 * b * g + df;
    let threshold = n0.powf(src / (2.0 * b + df));
    if !(n2 > threshold) {
        return Err(Error::Scope(format!(
            "the public-source rate assumes n2 > n0^((2βγ+d)/(2β+d)) = {threshold}, got n2 = {n2}"
        )));
    }
    let public_rate = n1.powf(-k / src).min(1.0);
    if n1 > n2 {
        return Ok((public_rate, PublicSourceCase::PublicDominant));
    }
    if n1 >= threshold {
        let (rate, case) = if eps <= n1.powf((b * g + df) / src) / n2 {
            (public_rate, PublicSourceCase::PublicOverPrivate)
        } else if eps <= n2.powf(-b * g / src) {
            (
                (n2 * n2 * eps * eps).powf(-k / (src + df)),
                PublicSourceCase::PrivateSourcePrivate,
            )
        } else {
            (n2.powf(-k / src), PublicSourceCase::PrivateSourceNonPrivate)
        };
        return Ok((rate.min(1.0), case));
    }
    let a0 = n0.powf(1.0 / (2.0 * b + df)).min((n0 * n0 * eps * eps).powf(1.0 / (2.0 * b + 2.0 * df)));
    let a1 = n1.powf(1.0 / src);
    let a2 = n2.powf(1.0 / src).min((n2 * n2 * eps * eps).powf(1.0 / (src + df)));
    if a1 >= a0.max(a2) {
        Ok((public_rate, PublicSourceCase::SmallPublicDominant))
    } else {
        Ok(((a0 + a2).powf(-k).min(1.0), PublicSourceCase::TargetAndPrivateSource))
    }
}

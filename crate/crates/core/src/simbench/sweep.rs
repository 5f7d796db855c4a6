//! Simulation scenarios, method runners and parameter sweeps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use super::design::{bayes_accuracy, generate_sample, target_test_set, Role, TestSet};
use super::hist::release_histograms;
use super::metrics::{accuracy, excess_risk, f1_score, mean_se};
use crate::adaptive::{AdaptiveConfig, AdaptiveSession, WeightPolicy};
use crate::classifier::{kernel_statistic, ServerDataset};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::privacy::{calibrate, NoiseSession, PrivacyBudget};
use crate::{seed, Error, Result};

/// Bandwidths searched by the oracle-tuned baselines.
pub const ORACLE_BANDWIDTHS: [f64; 7] = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125];

/// Target weights searched by the oracle-tuned baselines are `i / WEIGHT_STEPS`.
pub const WEIGHT_STEPS: usize = 100;

const STREAM_DATA: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_BAYES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Kernel transfer classifier with oracle-tuned bandwidth and target weight.
    Dtk,
    /// Histogram transfer classifier with oracle-tuned bin width and target weight.
    DtHist,
    /// Adaptive kernel classifier with homogeneous weights.
    AdaptDtk,
    /// Kernel classifier on the target alone, oracle-tuned bandwidth.
    TargetDtk,
    AdaptAll,
    AdaptTar,
    AdaptSamp,
    AdaptHomog,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Dtk,
        Method::DtHist,
        Method::AdaptDtk,
        Method::TargetDtk,
        Method::AdaptAll,
        Method::AdaptTar,
        Method::AdaptSamp,
        Method::AdaptHomog,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dtk => "DTK",
            Method::DtHist => "DT-HIST",
            Method::AdaptDtk => "AdaptDTK",
            Method::TargetDtk => "targetDTK",
            Method::AdaptAll => "AdaptAll",
            Method::AdaptTar => "AdaptTar",
            Method::AdaptSamp => "AdaptSamp",
            Method::AdaptHomog => "AdaptHomog",
        }
    }

    /// Weight policy of the adaptive methods.
    pub fn policy(&self) -> Option<WeightPolicy> {
        match self {
            Method::AdaptDtk | Method::AdaptHomog => Some(WeightPolicy::Homogeneous),
            Method::AdaptAll => Some(WeightPolicy::Simplex),
            Method::AdaptTar => Some(WeightPolicy::TargetOnly),
            Method::AdaptSamp => Some(WeightPolicy::SampleSize),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Method::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase().replace('-', "") == key)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// One cell of a simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub n_target: usize,
    pub n_sources: Vec<usize>,
    pub gamma: f64,
    /// Budget shared by every server; `∞` for the non-private setting.
    pub eps: f64,
    /// Shared δ; `None` means `δ_j = n_j^(−2)`.
    pub delta: Option<f64>,
    pub kernel: KernelFamily,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub test_size: usize,
    /// Number of test points sharing one joint noise draw.
    pub session_size: usize,
    pub adaptive: AdaptiveConfig,
}

impl SimScenario {
    /// `m` sources of size `n` next to a target of size `n`, with default settings.
    pub fn new(n: usize, m: usize, gamma: f64, eps: f64) -> Self {
        Self {
            n_target: n,
            n_sources: vec![n; m],
            gamma,
            eps,
            delta: None,
            kernel: KernelFamily::Triangular,
            replications: 50,
            seed: 0,
            methods: vec![Method::Dtk, Method::TargetDtk, Method::AdaptDtk],
            test_size: 2000,
            session_size: 100,
            adaptive: AdaptiveConfig::default(),
        }
    }

    pub fn m(&self) -> usize {
        self.n_sources.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_target == 0 {
            return Err(Error::Config("the target needs at least one sample".into()));
        }
        if self.n_sources.contains(&0) {
            return Err(Error::Config("every source needs at least one sample".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.eps)));
        }
        if self.replications == 0 || self.test_size == 0 || self.session_size == 0 {
            return Err(Error::Config("replications, test size and session size must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.kernel == KernelFamily::Epanechnikov && self.eps.is_finite() {
            return Err(Error::Config(
                "the Epanechnikov product kernel is not positive definite and cannot drive private releases".into(),
            ));
        }
        Ok(())
    }

    pub fn budget(&self, n: usize) -> Result<PrivacyBudget> {
        if self.eps.is_infinite() {
            return Ok(PrivacyBudget::public());
        }
        let delta = self.delta.unwrap_or(1.0 / (n as f64 * n as f64));
        PrivacyBudget::new(self.eps, delta)
    }

    fn budgets(&self) -> Result<Vec<PrivacyBudget>> {
        std::iter::once(self.n_target).chain(self.n_sources.iter().copied()).map(|n| self.budget(n)).collect()
    }
}

/// Outcome of one method on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub eps: f64,
    pub gamma: f64,
    pub m: usize,
    pub n: usize,
    pub replicate: usize,
    pub accuracy: f64,
    pub f1: f64,
    /// Monte Carlo excess risk against the known Bayes rule.
    pub excess_risk: f64,
    /// Selected bandwidth; the mean over test points for adaptive methods.
    pub h_selected: f64,
    /// Selected target weight; the mean over test points for adaptive methods.
    pub w0_selected: f64,
}

struct Evaluated {
    labels: Vec<u8>,
    h: f64,
    w0: f64,
}

fn generate_servers(s: &SimScenario, replicate: usize) -> Result<Vec<ServerDataset>> {
    let data_seed = seed::derive(s.seed, &[STREAM_DATA, replicate as u64]);
    let mut servers = vec![generate_sample(s.n_target, Role::Target, 0, seed::derive(data_seed, &[0]))?];
    for (j, &n) in s.n_sources.iter().enumerate() {
        let id = j + 1;
        servers.push(generate_sample(n, Role::Source { gamma: s.gamma }, id, seed::derive(data_seed, &[id as u64]))?);
    }
    Ok(servers)
}

/// Noisy kernel releases at every oracle bandwidth: `[h][server][point]`.
fn kernel_releases(
    servers: &[ServerDataset],
    spec: &KernelSpec,
    budgets: &[PrivacyBudget],
    points: &[Vec<f64>],
    session_size: usize,
    noise_seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut sessions: Vec<NoiseSession> = points
        .chunks(session_size)
        .enumerate()
        .map(|(c, chunk)| NoiseSession::new(chunk.to_vec(), seed::derive(noise_seed, &[c as u64])))
        .collect();
    ORACLE_BANDWIDTHS
        .iter()
        .map(|&h| {
            servers
                .iter()
                .enumerate()
                .map(|(j, server)| {
                    let cal = calibrate(spec, server.n(), h, &budgets[j], 1)?;
                    let mut out = Vec::with_capacity(points.len());
                    for session in sessions.iter_mut() {
                        let noise = session.noise(spec, j, h, &cal)?;
                        for (x, z) in session.points().iter().zip(noise) {
                            out.push(kernel_statistic(server, spec, h, x)? + z);
                        }
                    }
                    Ok(out)
                })
                .collect()
        })
        .collect()
}

/// Picks the bandwidth and target weight with the highest test accuracy.
///
/// `stats[h][server][point]`; sources enter through their plain average. Ties
/// keep the first candidate in (bandwidth, weight) order.
fn oracle_tune(stats: &[Vec<Vec<f64>>], truth: &[u8], target_only: bool) -> Evaluated {
    let mut best: Option<(usize, usize, f64, usize)> = None;
    for (hi, level) in stats.iter().enumerate() {
        let m = level.len() - 1;
        let sources: Vec<f64> = (0..truth.len())
            .map(|q| if m == 0 { 0.0 } else { level[1..].iter().map(|s| s[q]).sum::<f64>() / m as f64 })
            .collect();
        let steps: Vec<usize> = if target_only || m == 0 { vec![WEIGHT_STEPS] } else { (0..=WEIGHT_STEPS).collect() };
        for wi in steps {
            let w = wi as f64 / WEIGHT_STEPS as f64;
            let correct = (0..truth.len())
                .filter(|&q| u8::from(w * level[0][q] + (1.0 - w) * sources[q] >= 0.0) == truth[q])
                .count();
            if best.is_none_or(|b| correct > b.3) {
                best = Some((hi, wi, w, correct));
            }
        }
    }
    let (hi, _, w, _) = best.expect("at least one candidate");
    let level = &stats[hi];
    let m = level.len() - 1;
    let labels = (0..truth.len())
        .map(|q| {
            let src = if m == 0 { 0.0 } else { level[1..].iter().map(|s| s[q]).sum::<f64>() / m as f64 };
            u8::from(w * level[0][q] + (1.0 - w) * src >= 0.0)
        })
        .collect();
    Evaluated { labels, h: ORACLE_BANDWIDTHS[hi], w0: w }
}

fn histogram_stats(
    servers: &[ServerDataset],
    budgets: &[PrivacyBudget],
    points: &[Vec<f64>],
    noise_seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    ORACLE_BANDWIDTHS
        .iter()
        .enumerate()
        .map(|(hi, &h)| {
            let release = release_histograms(servers, h, budgets, seed::derive(noise_seed, &[hi as u64]))?;
            Ok(release
                .values()
                .iter()
                .map(|v| points.iter().map(|x| v[release.bin_of(x)]).collect())
                .collect())
        })
        .collect()
}

fn adaptive_runs(
    s: &SimScenario,
    servers: &[ServerDataset],
    spec: &KernelSpec,
    budgets: &[PrivacyBudget],
    points: &[Vec<f64>],
    policies: &[WeightPolicy],
    noise_seed: u64,
) -> Result<Vec<Evaluated>> {
    let mut out: Vec<Evaluated> =
        policies.iter().map(|_| Evaluated { labels: Vec::with_capacity(points.len()), h: 0.0, w0: 0.0 }).collect();
    for (c, chunk) in points.chunks(s.session_size).enumerate() {
        let session =
            AdaptiveSession::new(servers, spec, budgets, chunk, seed::derive(noise_seed, &[c as u64]), s.adaptive)?;
        for (e, &policy) in out.iter_mut().zip(policies) {
            for sel in session.select_all(policy)? {
                e.labels.push(sel.label);
                e.h += sel.h;
                e.w0 += sel.weights[0];
            }
        }
    }
    let q = points.len() as f64;
    for e in out.iter_mut() {
        e.h /= q;
        e.w0 /= q;
    }
    Ok(out)
}

/// Runs every requested method on one replicate of a scenario.
pub fn run_replicate(s: &SimScenario, replicate: usize) -> Result<Vec<RunRecord>> {
    s.validate()?;
    let spec = KernelSpec::new(s.kernel, 2)?;
    let servers = generate_servers(s, replicate)?;
    let budgets = s.budgets()?;
    let test: TestSet = target_test_set(s.test_size, seed::derive(s.seed, &[STREAM_TEST, replicate as u64]));
    let noise_seed = |stream: u64| seed::derive(s.seed, &[STREAM_NOISE, replicate as u64, stream]);
    let mut evaluated: Vec<(Method, Evaluated)> = Vec::new();

    let wants = |m: Method| s.methods.contains(&m);
    if wants(Method::Dtk) || wants(Method::TargetDtk) {
        let stats = kernel_releases(&servers, &spec, &budgets, &test.points, s.session_size, noise_seed(0))?;
        if wants(Method::Dtk) {
            evaluated.push((Method::Dtk, oracle_tune(&stats, &test.labels, false)));
        }
        if wants(Method::TargetDtk) {
            let target: Vec<Vec<Vec<f64>>> = stats.iter().map(|l| vec![l[0].clone()]).collect();
            evaluated.push((Method::TargetDtk, oracle_tune(&target, &test.labels, true)));
        }
    }
    if wants(Method::DtHist) {
        let stats = histogram_stats(&servers, &budgets, &test.points, noise_seed(1))?;
        evaluated.push((Method::DtHist, oracle_tune(&stats, &test.labels, false)));
    }
    let adaptive: Vec<Method> = s.methods.iter().copied().filter(|m| m.policy().is_some()).collect();
    if !adaptive.is_empty() {
        let policies: Vec<WeightPolicy> = adaptive.iter().map(|m| m.policy().unwrap()).collect();
        let runs = adaptive_runs(s, &servers, &spec, &budgets, &test.points, &policies, noise_seed(2))?;
        evaluated.extend(adaptive.into_iter().zip(runs));
    }

    evaluated.sort_by_key(|(m, _)| *m);
    Ok(evaluated
        .into_iter()
        .map(|(method, e)| RunRecord {
            method,
            eps: s.eps,
            gamma: s.gamma,
            m: s.m(),
            n: s.n_target,
            replicate,
            accuracy: accuracy(&e.labels, &test.labels),
            f1: f1_score(&e.labels, &test.labels),
            excess_risk: excess_risk(&e.labels, &test.eta),
            h_selected: e.h,
            w0_selected: e.w0,
        })
        .collect())
}

/// Aggregate of one method in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub eps: f64,
    pub gamma: f64,
    pub m: usize,
    pub n: usize,
    pub replications: usize,
    pub mean_accuracy: f64,
    pub se_accuracy: f64,
    pub mean_f1: f64,
    pub mean_excess_risk: f64,
    /// Bayes accuracy minus mean accuracy.
    pub bayes_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub bayes_accuracy: f64,
    pub bayes_se: f64,
    pub notes: Vec<String>,
}

impl EvalReport {
    /// Accuracies of `method` in the cell whose swept value matches, ordered by replicate.
    pub fn accuracies(&self, method: Method, cell: impl Fn(&RunRecord) -> bool) -> Vec<f64> {
        let mut rows: Vec<&RunRecord> = self.records.iter().filter(|r| r.method == method && cell(r)).collect();
        rows.sort_by_key(|r| r.replicate);
        rows.into_iter().map(|r| r.accuracy).collect()
    }

    pub fn mean_accuracy(&self, method: Method, cell: impl Fn(&RunRecord) -> bool) -> f64 {
        mean_se(&self.accuracies(method, cell)).0
    }
}

const BAYES_SAMPLES: usize = 1_000_000;

fn report_notes(s: &SimScenario) -> Vec<String> {
    let mut notes = vec![
        format!("kernel={}", s.kernel),
        "test sets are non-private and drawn from the target design".to_string(),
        "DTK, DT-HIST and targetDTK are tuned on the test set (oracle tuning)".to_string(),
        format!("noise is drawn jointly over sessions of {} test points", s.session_size),
    ];
    if s.methods.contains(&Method::DtHist) {
        notes.push("DT-HIST privatises each bin with the Gaussian mechanism at sensitivity 1/(n h^d)".into());
    }
    notes
}

fn summarise(records: &[RunRecord], bayes: f64) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, u64, u64, usize, usize)> = Vec::new();
    for r in records {
        let k = (r.method, r.eps.to_bits(), r.gamma.to_bits(), r.m, r.n);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, eps, gamma, m, n)| {
            let rows: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.method == method && r.eps.to_bits() == eps && r.gamma.to_bits() == gamma && r.m == m && r.n == n)
                .collect();
            let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
            let (mean_accuracy, se_accuracy) = mean_se(&acc);
            let mean_f1 = mean_se(&rows.iter().map(|r| r.f1).collect::<Vec<_>>()).0;
            let mean_excess_risk = mean_se(&rows.iter().map(|r| r.excess_risk).collect::<Vec<_>>()).0;
            SummaryRow {
                method,
                eps: f64::from_bits(eps),
                gamma: f64::from_bits(gamma),
                m,
                n,
                replications: rows.len(),
                mean_accuracy,
                se_accuracy,
                mean_f1,
                mean_excess_risk,
                bayes_gap: bayes - mean_accuracy,
            }
        })
        .collect()
}

fn run_cells(cells: &[SimScenario]) -> Result<EvalReport> {
    let first = cells.first().ok_or_else(|| Error::Config("no cells to run".into()))?;
    for c in cells {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> =
        cells.iter().enumerate().flat_map(|(i, c)| (0..c.replications).map(move |r| (i, r))).collect();
    let results: Vec<Result<Vec<RunRecord>>> = jobs.par_iter().map(|&(i, r)| run_replicate(&cells[i], r)).collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    let (bayes_accuracy, bayes_se) = bayes_accuracy(BAYES_SAMPLES, seed::derive(first.seed, &[STREAM_BAYES]));
    let summary = summarise(&records, bayes_accuracy);
    Ok(EvalReport { records, summary, bayes_accuracy, bayes_se, notes: report_notes(first) })
}

/// Runs a single scenario.
pub fn run_scenario(s: &SimScenario) -> Result<EvalReport> {
    run_cells(std::slice::from_ref(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Eps,
    Gamma,
    M,
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eps" | "epsilon" => Ok(SweepVariable::Eps),
            "gamma" => Ok(SweepVariable::Gamma),
            "m" => Ok(SweepVariable::M),
            other => Err(Error::Config(format!("unknown sweep variable '{other}' (expected eps, gamma or m)"))),
        }
    }
}

/// How sample sizes are assigned when the number of sources varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceLayout {
    /// The target keeps its size; the sources split `total` as evenly as possible.
    SourcesShareTotal(usize),
    /// Target and sources together split `total` as evenly as possible.
    AllShareTotal(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub layout: SourceLayout,
}

/// Splits `total` into `parts` sizes differing by at most one.
pub fn split_evenly(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|i| total / parts + usize::from(i < total % parts)).collect()
}

fn cell(base: &SimScenario, sweep: &Sweep, value: f64) -> Result<SimScenario> {
    let mut s = base.clone();
    match sweep.variable {
        SweepVariable::Eps => s.eps = value,
        SweepVariable::Gamma => s.gamma = value,
        SweepVariable::M => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::Config(format!("m must be a positive integer, got {value}")));
            }
            let m = value as usize;
            match sweep.layout {
                SourceLayout::SourcesShareTotal(total) => {
                    if total < m {
                        return Err(Error::Config(format!("cannot split {total} samples over {m} sources")));
                    }
                    s.n_sources = split_evenly(total, m);
                }
                SourceLayout::AllShareTotal(total) => {
                    if total < m + 1 {
                        return Err(Error::Config(format!("cannot split {total} samples over {} servers", m + 1)));
                    }
                    let sizes = split_evenly(total, m + 1);
                    s.n_target = sizes[0];
                    s.n_sources = sizes[1..].to_vec();
                }
            }
        }
    }
    Ok(s)
}

/// Runs `base` once per swept value; replicates run in parallel.
pub fn run_sweep(base: &SimScenario, sweep: &Sweep) -> Result<EvalReport> {
    if sweep.values.is_empty() {
        return Err(Error::Config("sweep has no values".into()));
    }
    let cells = sweep.values.iter().map(|&v| cell(base, sweep, v)).collect::<Result<Vec<_>>>()?;
    run_cells(&cells)
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Tidy per-replicate table.
pub fn write_records_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method", "eps", "gamma", "m", "n", "replicate", "accuracy", "f1", "h_selected", "w0_selected", "excess_risk",
    ])?;
    for r in records {
        w.write_record([
            r.method.name().to_string(),
            fmt_f64(r.eps),
            fmt_f64(r.gamma),
            r.m.to_string(),
            r.n.to_string(),
            r.replicate.to_string(),
            fmt_f64(r.accuracy),
            fmt_f64(r.f1),
            fmt_f64(r.h_selected),
            fmt_f64(r.w0_selected),
            fmt_f64(r.excess_risk),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "eps",
        "gamma",
        "m",
        "n",
        "replications",
        "mean_accuracy",
        "se_accuracy",
        "mean_f1",
        "mean_excess_risk",
        "bayes_gap",
    ])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            fmt_f64(r.eps),
            fmt_f64(r.gamma),
            r.m.to_string(),
            r.n.to_string(),
            r.replications.to_string(),
            fmt_f64(r.mean_accuracy),
            fmt_f64(r.se_accuracy),
            fmt_f64(r.mean_f1),
            fmt_f64(r.mean_excess_risk),
            fmt_f64(r.bayes_gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

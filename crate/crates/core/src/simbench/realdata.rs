//! Multi-site real-data benchmark with the adaptive weight policies.
//!
//! Each replicate holds out a test set from the target site, fits the scaling on
//! the remaining rows of every site, releases all statistics once, and applies
//! every requested weight policy to the same release.

use std::io::Write;

use rayon::prelude::*;

use super::metrics::{accuracy, f1_score, mean_se};
use crate::adaptive::{AdaptiveConfig, AdaptiveSession, WeightPolicy};
use crate::dataio::{preprocess, split, RawTable};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::privacy::PrivacyBudget;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RealDataConfig {
    /// Budget shared by every site.
    pub eps: f64,
    /// Shared δ; `None` means `δ_j = n_j^(−2)`.
    pub delta: Option<f64>,
    pub test_size: usize,
    pub replications: usize,
    pub seed: u64,
    pub kernel: KernelFamily,
    pub adaptive: AdaptiveConfig,
    pub policies: Vec<WeightPolicy>,
}

impl RealDataConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            delta: None,
            test_size: 150,
            replications: 50,
            seed: 0,
            kernel: KernelFamily::Triangular,
            adaptive: AdaptiveConfig::default(),
            policies: vec![
                WeightPolicy::Simplex,
                WeightPolicy::TargetOnly,
                WeightPolicy::SampleSize,
                WeightPolicy::Homogeneous,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealDataRecord {
    pub policy: WeightPolicy,
    pub eps: f64,
    pub replicate: usize,
    pub accuracy: f64,
    pub f1: f64,
    /// Accuracy of predicting the test set's majority class.
    pub majority_baseline: f64,
}

/// Test-set predictions of one policy on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub policy: WeightPolicy,
    pub replicate: usize,
    pub index: usize,
    pub truth: u8,
    pub predicted: u8,
    pub h: f64,
    pub w0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealDataReport {
    pub records: Vec<RealDataRecord>,
    pub predictions: Vec<Prediction>,
    /// Training sizes per site in the first replicate.
    pub train_sizes: Vec<usize>,
}

impl RealDataReport {
    pub fn mean_accuracy(&self, policy: WeightPolicy) -> f64 {
        mean_se(&self.records.iter().filter(|r| r.policy == policy).map(|r| r.accuracy).collect::<Vec<_>>()).0
    }

    pub fn mean_f1(&self, policy: WeightPolicy) -> f64 {
        mean_se(&self.records.iter().filter(|r| r.policy == policy).map(|r| r.f1).collect::<Vec<_>>()).0
    }

    pub fn mean_majority_baseline(&self) -> f64 {
        let mut seen = Vec::new();
        for r in &self.records {
            if !seen.iter().any(|(rep, _)| *rep == r.replicate) {
                seen.push((r.replicate, r.majority_baseline));
            }
        }
        mean_se(&seen.into_iter().map(|(_, b)| b).collect::<Vec<_>>()).0
    }
}

fn budget(cfg: &RealDataConfig, n: usize) -> Result<PrivacyBudget> {
    if cfg.eps.is_infinite() {
        Ok(PrivacyBudget::public())
    } else {
        PrivacyBudget::new(cfg.eps, cfg.delta.unwrap_or(1.0 / (n.max(1) as f64).powi(2)))
    }
}

type ReplicateOutput = (Vec<RealDataRecord>, Vec<Prediction>, Vec<usize>);

fn run_replicate(tables: &[RawTable], cfg: &RealDataConfig, replicate: usize) -> Result<ReplicateOutput> {
    let (train, test) = split(&tables[0], cfg.test_size, seed::derive(cfg.seed, &[1, replicate as u64]))?;
    if test.is_empty() {
        return Err(Error::Config("the test set must hold at least one row".into()));
    }
    let mut train_tables = vec![train];
    train_tables.extend(tables[1..].iter().cloned());
    let pre = preprocess(&train_tables)?;
    let d = pre.scaling.mins.len();
    let spec = KernelSpec::new(cfg.kernel, d)?;
    let budgets = pre.servers.iter().map(|s| budget(cfg, s.n())).collect::<Result<Vec<_>>>()?;
    let queries = pre.transform(&test.rows);
    let session = AdaptiveSession::new(
        &pre.servers,
        &spec,
        &budgets,
        &queries,
        seed::derive(cfg.seed, &[2, replicate as u64]),
        cfg.adaptive,
    )?;
    let prevalence = test.prevalence();
    let majority_baseline = prevalence.max(1.0 - prevalence);
    let mut records = Vec::new();
    let mut predictions = Vec::new();
    for &policy in &cfg.policies {
        let sel = session.select_all(policy)?;
        let labels: Vec<u8> = sel.iter().map(|s| s.label).collect();
        records.push(RealDataRecord {
            policy,
            eps: cfg.eps,
            replicate,
            accuracy: accuracy(&labels, &test.labels),
            f1: f1_score(&labels, &test.labels),
            majority_baseline,
        });
        predictions.extend(sel.iter().enumerate().map(|(index, s)| Prediction {
            policy,
            replicate,
            index,
            truth: test.labels[index],
            predicted: s.label,
            h: s.h,
            w0: s.weights[0],
        }));
    }
    Ok((records, predictions, pre.servers.iter().map(|s| s.n()).collect()))
}

/// Runs every policy over `cfg.replications` random target splits; `tables[0]` is the target.
pub fn run_real_data(tables: &[RawTable], cfg: &RealDataConfig) -> Result<RealDataReport> {
    if tables.is_empty() {
        return Err(Error::Data("no sites were loaded".into()));
    }
    if cfg.replications == 0 || cfg.policies.is_empty() {
        return Err(Error::Config("replications and policies must be non-empty".into()));
    }
    let results: Vec<Result<ReplicateOutput>> =
        (0..cfg.replications).into_par_iter().map(|r| run_replicate(tables, cfg, r)).collect();
    let mut report = RealDataReport { records: Vec::new(), predictions: Vec::new(), train_sizes: Vec::new() };
    for (i, r) in results.into_iter().enumerate() {
        let (rec, pred, sizes) = r?;
        if i == 0 {
            report.train_sizes = sizes;
        }
        report.records.extend(rec);
        report.predictions.extend(pred);
    }
    Ok(report)
}

/// Per-query predictions: `policy,replicate,index,truth,predicted,h,w0`.
pub fn write_predictions_csv<W: Write>(out: W, predictions: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "replicate", "index", "truth", "predicted", "h", "w0"])?;
    for p in predictions {
        w.write_record([
            p.policy.name().to_string(),
            p.replicate.to_string(),
            p.index.to_string(),
            p.truth.to_string(),
            p.predicted.to_string(),
            p.h.to_string(),
            p.w0.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-replicate metrics: `policy,eps,replicate,accuracy,f1,majority_baseline`.
pub fn write_metrics_csv<W: Write>(out: W, records: &[RealDataRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "eps", "replicate", "accuracy", "f1", "majority_baseline"])?;
    for r in records {
        w.write_record([
            r.policy.name().to_string(),
            r.eps.to_string(),
            r.replicate.to_string(),
            r.accuracy.to_string(),
            r.f1.to_string(),
            r.majority_baseline.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per policy with replicate means and the standard error of the accuracy.
pub fn write_real_summary_csv<W: Write>(out: W, report: &RealDataReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "eps", "replications", "mean_accuracy", "se_accuracy", "mean_f1", "majority_baseline"])?;
    let mut policies: Vec<WeightPolicy> = Vec::new();
    for r in &report.records {
        if !policies.contains(&r.policy) {
            policies.push(r.policy);
        }
    }
    let baseline = report.mean_majority_baseline();
    for policy in policies {
        let rows: Vec<&RealDataRecord> = report.records.iter().filter(|r| r.policy == policy).collect();
        let (acc, se) = mean_se(&rows.iter().map(|r| r.accuracy).collect::<Vec<_>>());
        w.write_record([
            policy.name().to_string(),
            rows[0].eps.to_string(),
            rows.len().to_string(),
            acc.to_string(),
            se.to_string(),
            report.mean_f1(policy).to_string(),
            baseline.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

use std::path::PathBuf;

use clap::Args;
use dptransfer::adaptive::{AdaptiveConfig, ThresholdVariant, WeightPolicy};
use dptransfer::dataio::{load_csv, LabelRule, Schema, TabularSource, HEART_COLUMNS};
use dptransfer::kernels::KernelFamily;
use dptransfer::simbench::realdata::{
    run_real_data, write_metrics_csv, write_predictions_csv, write_real_summary_csv, RealDataConfig,
};

use crate::config::{Layer, Settings};
use crate::output::Output;
use crate::{flag_layer, resolve, CommonArgs, Failure};

pub const DEFAULTS: &[(&str, &str)] = &[
    ("data_dir", "data/heart"),
    (
        "files",
        "processed.hungarian.data,processed.cleveland.data,processed.va.data,processed.switzerland.data",
    ),
    ("site_labels", "hungarian,cleveland,long-beach,switzerland"),
    ("columns", "heart"),
    ("covariates", "age,sex,cp,exang,thalach,oldpeak,trestbps"),
    ("label", "num"),
    ("label_rule", "positive"),
    ("delimiter", ","),
    ("missing", "?"),
    ("eps", "5"),
    ("delta", "auto"),
    ("test_size", "150"),
    ("replications", "50"),
    ("policies", "AdaptAll,AdaptTar,AdaptSamp,AdaptHomog"),
    ("kernel", "triangular"),
    ("threshold_variant", "prose"),
    ("g_max", "1"),
    ("seed", "0"),
];

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// Directory holding the site files; the first file is the target.
    #[arg(long)]
    data_dir: Option<String>,
    /// Privacy budget shared by every site (`inf` for none).
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    /// Kernel family.
    #[arg(long, value_parser = ["triangular", "epanechnikov", "gaussian"])]
    kernel: Option<String>,
    /// Threshold used by the adaptive selection.
    #[arg(long, value_parser = ["prose", "box"])]
    threshold_variant: Option<String>,
}

impl ClassifyArgs {
    fn layer(&self) -> Layer {
        flag_layer(&[
            ("data_dir", self.data_dir.clone()),
            ("eps", self.eps.clone()),
            ("replications", self.replications.clone()),
            ("kernel", self.kernel.clone()),
            ("threshold_variant", self.threshold_variant.clone()),
        ])
    }
}

fn delimiter(raw: &str) -> Result<u8, Failure> {
    match raw {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        s if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        s => Err(Failure::Config(format!("delimiter must be a single ASCII character or 'tab', got '{s}'"))),
    }
}

fn sources(s: &Settings) -> Result<Vec<TabularSource>, Failure> {
    let dir = PathBuf::from(s.str("data_dir"));
    let files = s.strings("files");
    if files.is_empty() {
        return Err(Failure::Config("'files' needs at least one entry (the target comes first)".into()));
    }
    let labels = s.strings("site_labels");
    if !labels.is_empty() && labels.len() != files.len() {
        return Err(Failure::Config(format!("{} site labels for {} files", labels.len(), files.len())));
    }
    let columns = match s.str("columns") {
        "heart" => Some(HEART_COLUMNS.iter().map(|c| c.to_string()).collect()),
        "header" => None,
        _ => Some(s.strings("columns")),
    };
    let covariates = s.strings("covariates");
    if covariates.is_empty() {
        return Err(Failure::Config("'covariates' needs at least one column".into()));
    }
    let label_rule = match s.str("label_rule") {
        "positive" => LabelRule::Positive,
        "binary" => LabelRule::Binary,
        other => return Err(Failure::Config(format!("unknown label_rule '{other}' (expected positive or binary)"))),
    };
    let schema = Schema { columns, covariates, label: s.str("label").to_string(), label_rule };
    let delimiter = delimiter(s.str("delimiter"))?;
    Ok(files
        .iter()
        .enumerate()
        .map(|(i, f)| TabularSource {
            path: dir.join(f),
            server_label: labels.get(i).cloned().unwrap_or_else(|| f.clone()),
            schema: schema.clone(),
            delimiter,
            missing: s.str("missing").to_string(),
        })
        .collect())
}

fn config(s: &Settings) -> Result<RealDataConfig, Failure> {
    let eps: f64 = s.parse("eps")?;
    if !(eps > 0.0) {
        return Err(Failure::Config(format!("eps must be positive, got {eps}")));
    }
    let kernel = s.parse::<KernelFamily>("kernel")?;
    if kernel == KernelFamily::Epanechnikov && eps.is_finite() {
        return Err(Failure::Config(
            "the Epanechnikov product kernel is not positive definite and cannot drive private releases".into(),
        ));
    }
    let policies = s.list::<WeightPolicy>("policies")?;
    if policies.is_empty() {
        return Err(Failure::Config("'policies' needs at least one entry".into()));
    }
    Ok(RealDataConfig {
        eps,
        delta: s.optional("delta")?,
        test_size: s.parse("test_size")?,
        replications: s.parse("replications")?,
        seed: s.parse("seed")?,
        kernel,
        adaptive: AdaptiveConfig { g_max: s.parse("g_max")?, threshold: s.parse::<ThresholdVariant>("threshold_variant")? },
        policies,
    })
}

pub fn run(common: &CommonArgs, args: &ClassifyArgs) -> Result<(), Failure> {
    let settings = resolve(DEFAULTS, None, common, args.layer())?;
    let cfg = config(&settings)?;
    let sources = sources(&settings)?;
    let tables = load_csv(&sources)?;
    let report = run_real_data(&tables, &cfg)?;

    let out = Output::create(&common.out, "classify", &settings)?;
    let mut notes = vec![format!("target site: {}; test rows per replicate: {}", tables[0].server_label, cfg.test_size)];
    for (t, n) in tables.iter().zip(&report.train_sizes) {
        notes.push(format!(
            "site {}: {} rows used, {} dropped for missing values, {} training rows",
            t.server_label,
            t.len(),
            t.dropped,
            n
        ));
    }
    if cfg.delta.is_none() && cfg.eps.is_finite() {
        notes.push("delta_j = n_j^-2 per site".into());
    }
    out.csv("predictions.csv", &notes, |w| write_predictions_csv(w, &report.predictions))?;
    out.csv("metrics.csv", &notes, |w| write_metrics_csv(w, &report.records))?;
    out.csv("summary.csv", &notes, |w| write_real_summary_csv(w, &report))?;
    for policy in &cfg.policies {
        println!(
            "{:<10} accuracy {:.4}  f1 {:.4}",
            policy.name(),
            report.mean_accuracy(*policy),
            report.mean_f1(*policy)
        );
    }
    println!("{:<10} accuracy {:.4}", "majority", report.mean_majority_baseline());
    Ok(())
}

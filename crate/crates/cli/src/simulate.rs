use clap::Args;
use dptransfer::adaptive::{AdaptiveConfig, ThresholdVariant};
use dptransfer::kernels::KernelFamily;
use dptransfer::simbench::sweep::{write_records_csv, write_summary_csv};
use dptransfer::simbench::{run_scenario, run_sweep, EvalReport, Method, SimScenario, SourceLayout, Sweep, SweepVariable};

use crate::config::{Layer, Settings};
use crate::output::Output;
use crate::{flag_layer, resolve, CommonArgs, Failure};

pub const DEFAULTS: &[(&str, &str)] = &[
    ("preset", "none"),
    ("n", "500"),
    ("m", "1"),
    ("gamma", "0.5"),
    ("eps", "1"),
    ("delta", "auto"),
    ("replications", "50"),
    ("test_size", "2000"),
    ("session_size", "100"),
    ("methods", "DTK,targetDTK,AdaptDTK"),
    ("sweep", "none"),
    ("values", ""),
    ("layout", "sources"),
    ("total", "500"),
    ("g_max", "1"),
    ("threshold_variant", "prose"),
    ("kernel", "triangular"),
    ("seed", "0"),
];

const EPS_GRID: &str = "0.1,0.2,0.5,1,2,5";

fn layer(pairs: &[(&str, &str)]) -> Layer {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Desk-scale versions of the three published simulation studies.
pub fn preset(name: &str) -> Result<Layer, Failure> {
    match name {
        "none" | "" => Ok(Vec::new()),
        "effect-of-source" => Ok(layer(&[
            ("n", "100"),
            ("m", "1"),
            ("gamma", "0.5,1,1.5"),
            ("sweep", "eps"),
            ("values", EPS_GRID),
            ("methods", "DTK,targetDTK"),
            ("replications", "20"),
        ])),
        "effect-of-privacy" => Ok(layer(&[
            ("n", "500"),
            ("m", "1"),
            ("gamma", "0.5"),
            ("sweep", "eps"),
            ("values", EPS_GRID),
            ("methods", "DTK,DT-HIST,AdaptDTK"),
            ("replications", "20"),
        ])),
        "effect-of-m" => Ok(layer(&[
            ("gamma", "0.25,1,4"),
            ("eps", "1"),
            ("sweep", "m"),
            ("values", "1,2,5,10,15,20"),
            ("layout", "all"),
            ("total", "500"),
            ("methods", "DTK,AdaptDTK"),
            ("replications", "20"),
        ])),
        other => Err(Failure::Config(format!(
            "unknown preset '{other}' (expected none, effect-of-source, effect-of-privacy or effect-of-m)"
        ))),
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// effect-of-source, effect-of-privacy or effect-of-m.
    #[arg(long)]
    preset: Option<String>,
    /// Kernel family.
    #[arg(long, value_parser = ["triangular", "epanechnikov", "gaussian"])]
    kernel: Option<String>,
    /// Threshold used by the adaptive selection.
    #[arg(long, value_parser = ["prose", "box"])]
    threshold_variant: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    /// eps, gamma, m or none.
    #[arg(long)]
    sweep: Option<String>,
    /// Values of the swept variable.
    #[arg(long)]
    values: Option<String>,
}

impl SimulateArgs {
    fn layer(&self) -> Layer {
        flag_layer(&[
            ("preset", self.preset.clone()),
            ("kernel", self.kernel.clone()),
            ("threshold_variant", self.threshold_variant.clone()),
            ("replications", self.replications.clone()),
            ("sweep", self.sweep.clone()),
            ("values", self.values.clone()),
        ])
    }
}

fn base_scenario(s: &Settings, gamma: f64) -> Result<SimScenario, Failure> {
    let mut sc = SimScenario::new(s.parse("n")?, s.parse("m")?, gamma, s.parse("eps")?);
    sc.delta = s.optional("delta")?;
    sc.kernel = s.parse::<KernelFamily>("kernel")?;
    sc.replications = s.parse("replications")?;
    sc.seed = s.parse("seed")?;
    sc.methods = s.list::<Method>("methods")?;
    sc.test_size = s.parse("test_size")?;
    sc.session_size = s.parse("session_size")?;
    sc.adaptive = AdaptiveConfig { g_max: s.parse("g_max")?, threshold: s.parse::<ThresholdVariant>("threshold_variant")? };
    Ok(sc)
}

fn sweep(s: &Settings) -> Result<Option<Sweep>, Failure> {
    let variable = match s.str("sweep") {
        "none" | "" => return Ok(None),
        v => v.parse::<SweepVariable>()?,
    };
    let values: Vec<f64> = s.list("values")?;
    if values.is_empty() {
        return Err(Failure::Config(format!("sweep = {} needs a non-empty 'values' list", s.str("sweep"))));
    }
    let total: usize = s.parse("total")?;
    let layout = match s.str("layout") {
        "sources" => SourceLayout::SourcesShareTotal(total),
        "all" => SourceLayout::AllShareTotal(total),
        other => return Err(Failure::Config(format!("unknown layout '{other}' (expected sources or all)"))),
    };
    Ok(Some(Sweep { variable, values, layout }))
}

pub fn run(common: &CommonArgs, args: &SimulateArgs) -> Result<(), Failure> {
    let settings = resolve(DEFAULTS, Some(&preset), common, args.layer())?;
    let sweep = sweep(&settings)?;
    let gammas: Vec<f64> = match &sweep {
        // the swept values replace the γ list
        Some(sw) if sw.variable == SweepVariable::Gamma => vec![sw.values[0]],
        _ => settings.list("gamma")?,
    };
    if gammas.is_empty() {
        return Err(Failure::Config("'gamma' needs at least one value".into()));
    }
    let mut reports: Vec<EvalReport> = Vec::new();
    for &gamma in &gammas {
        let base = base_scenario(&settings, gamma)?;
        base.validate()?;
        reports.push(match &sweep {
            Some(sw) => run_sweep(&base, sw)?,
            None => run_scenario(&base)?,
        });
    }
    let mut merged = reports.remove(0);
    for r in reports {
        merged.records.extend(r.records);
        merged.summary.extend(r.summary);
    }

    let out = Output::create(&common.out, "simulate", &settings)?;
    let mut notes = vec![format!(
        "Bayes accuracy on the target test distribution: {} (MC se {})",
        merged.bayes_accuracy, merged.bayes_se
    )];
    notes.extend(merged.notes.iter().cloned());
    out.csv("records.csv", &notes, |w| write_records_csv(w, &merged.records))?;
    out.csv("summary.csv", &notes, |w| write_summary_csv(w, &merged.summary))?;
    Ok(())
}

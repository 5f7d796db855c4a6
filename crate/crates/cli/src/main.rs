//! `dptransfer`: rate exploration, simulation sweeps and real-data classification.

mod classify;
mod config;
mod output;
mod rates;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Layer, Origin, Settings};

#[derive(Parser, Debug)]
#[command(name = "dptransfer", version, about = "Transfer-learning classifiers under distributed differential privacy")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
pub(crate) struct CommonArgs {
    /// Flat TOML parameter file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set eps=0.5`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate curve over ε and the phase-diagram boundaries.
    Rates(rates::RatesArgs),
    /// Simulation sweeps over ε, γ or the number of sources.
    Simulate(simulate::SimulateArgs),
    /// Adaptive classification of multi-site tabular data.
    Classify(classify::ClassifyArgs),
}

/// Failures grouped by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<dptransfer::Error> for Failure {
    fn from(e: dptransfer::Error) -> Self {
        use dptransfer::Error as E;
        let msg = e.to_string();
        match e {
            E::Input(_) | E::Config(_) | E::Scope(_) | E::Degenerate(_) => Failure::Config(msg),
            E::EmptyServer { .. } | E::Data(_) | E::Io(_) | E::Csv(_) => Failure::Data(msg),
            E::Numerical(_) => Failure::Numerical(msg),
        }
    }
}

/// Applies preset, file, `--set` and flag layers on top of the defaults.
/// The preset may itself be chosen by any later layer.
pub(crate) fn resolve(
    defaults: &[(&str, &str)],
    presets: Option<&dyn Fn(&str) -> Result<Layer, Failure>>,
    common: &CommonArgs,
    flags: Layer,
) -> Result<Settings, Failure> {
    let file = match &common.config {
        Some(path) => config::read_config(path)?,
        None => Vec::new(),
    };
    let set = common.set.iter().map(|s| config::parse_assignment(s)).collect::<Result<Layer, _>>()?;
    let mut flags = flags;
    if let Some(seed) = common.seed {
        flags.push(("seed".into(), seed.to_string()));
    }
    let mut settings = Settings::new(defaults);
    // validate keys before looking for the preset
    let mut probe = settings.clone();
    probe.apply(&file, Origin::File)?;
    probe.apply(&set, Origin::Set)?;
    probe.apply(&flags, Origin::Flag)?;
    if let Some(presets) = presets {
        settings.apply(&presets(probe.str("preset"))?, Origin::Preset)?;
    }
    settings.apply(&file, Origin::File)?;
    settings.apply(&set, Origin::Set)?;
    settings.apply(&flags, Origin::Flag)?;
    Ok(settings)
}

/// Collects `Some` flag values as `(key, value)` pairs.
pub(crate) fn flag_layer(pairs: &[(&str, Option<String>)]) -> Layer {
    pairs.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot size the worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Rates(args) => rates::run(&cli.common, args),
        Command::Simulate(args) => simulate::run(&cli.common, args),
        Command::Classify(args) => classify::run(&cli.common, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dptransfer: {e}");
            ExitCode::from(e.code())
        }
    }
}

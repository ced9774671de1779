//! `pgp`: synthetic cohorts, preprocessing and cross-validated evaluation of
//! population and personalized GP forecasters.
//!
//! Exit codes: 0 success, 1 numerical or runtime failure, 2 usage or input
//! error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgp_core::evaluation::ModelKind;

use config::RunConfig;

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    /// Wraps a library error, classifying it by cause.
    pub fn core(context: &str) -> impl Fn(pgp_core::Error) -> Failure + '_ {
        move |e| Failure { code: if e.is_input_error() { 2 } else { 1 }, message: format!("{context}: {e}") }
    }
}

#[derive(Parser)]
#[command(name = "pgp", version, about = "Population and personalized GP forecasting of longitudinal scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic cohort and its schema.
    Synth(SynthArgs),
    /// Parse visit files, select the cohort and write it out unfilled.
    Preprocess(PreprocessArgs),
    /// Cross-validate the selected models and write the reports.
    Evaluate(EvaluateArgs),
    /// Print a saved metrics file and optionally re-emit its report files.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration. Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DataArgs {
    /// Schema TOML describing the feature columns.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Visit CSV files (repeatable).
    #[arg(short, long = "input", num_args = 1..)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    patients: Option<usize>,
    /// Scale of per-patient deviations from the population trajectory.
    #[arg(long)]
    offset_scale: Option<f64>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    missing_rate: Option<f64>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    min_visits: Option<usize>,
    #[arg(long)]
    max_missing: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated models (gp, gp-ar, pgp, pgp-ar) or `all`.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Share of feature variance kept by the PCA projection.
    #[arg(long)]
    pca_ratio: Option<f64>,
    /// Optimizer restarts per fitted model.
    #[arg(long)]
    restarts: Option<usize>,
    /// Folds evaluated concurrently. Results do not depend on it.
    #[arg(short, long)]
    jobs: Option<usize>,
    /// Leave clinical status out of the auto-regressive inputs.
    #[arg(long)]
    no_status_input: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// A metrics.json written by `evaluate`.
    metrics: PathBuf,
    #[command(flatten)]
    common: Common,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut c = RunConfig::load(self.config.as_deref())?;
        if let Some(o) = &self.output {
            c.output = o.clone();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        Ok(c)
    }
}

impl DataArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(s) = &self.schema {
            c.schema = Some(s.clone());
        }
        if !self.inputs.is_empty() {
            c.input = self.inputs.clone();
        }
    }
}

fn parse_models(names: &[String]) -> Result<Vec<ModelKind>, Failure> {
    if names.iter().any(|n| n == "all") {
        return Ok(ModelKind::ALL.to_vec());
    }
    names.iter().map(|n| n.trim().parse().map_err(Failure::core("--models"))).collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth(a) => {
            let mut c = a.common.resolve()?;
            if let Some(n) = a.patients {
                c.synth.n_patients = n;
            }
            if let Some(v) = a.offset_scale {
                c.synth.offset_scale = v;
            }
            if let Some(v) = a.noise_scale {
                c.synth.noise_scale = v;
            }
            if let Some(v) = a.missing_rate {
                c.synth.missing_rate = v;
            }
            c.validate()?;
            commands::synth(&c)
        }
        Command::Preprocess(a) => {
            let mut c = a.common.resolve()?;
            a.data.apply(&mut c);
            if let Some(v) = a.min_visits {
                c.min_visits = v;
            }
            if let Some(v) = a.max_missing {
                c.max_missing = v;
            }
            c.validate()?;
            commands::preprocess(&c)
        }
        Command::Evaluate(a) => {
            let mut c = a.common.resolve()?;
            a.data.apply(&mut c);
            if !a.models.is_empty() {
                c.models = parse_models(&a.models)?;
            }
            if let Some(v) = a.folds {
                c.folds = v;
            }
            if let Some(v) = a.pca_ratio {
                c.pca_ratio = v;
            }
            if let Some(v) = a.restarts {
                c.restarts = v;
            }
            if let Some(v) = a.jobs {
                c.jobs = v;
            }
            if a.no_status_input {
                c.include_status = false;
            }
            c.validate()?;
            commands::evaluate(&c)
        }
        Command::Report(a) => {
            let explicit = a.common.config.is_some() || a.common.output.is_some();
            let c = a.common.resolve()?;
            commands::report(&a.metrics, explicit.then_some(&c))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

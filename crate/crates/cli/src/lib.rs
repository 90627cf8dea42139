//! The `joinpoint` command line: ingest → fit → report, plus a synthetic data generator.

pub mod config;
pub mod fit;
pub mod ingest;
pub mod report;

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use joinpoint::synth::{write_csv, SynthSpec};
use serde::Serialize;

use config::{AnalysisConfig, ConfigArgs};

/// Exit status for a clean run.
pub const EXIT_OK: i32 = 0;
/// Exit status when the run finished but produced warnings.
pub const EXIT_WARNINGS: i32 = 1;
/// Exit status for unusable input.
pub const EXIT_UNUSABLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "joinpoint",
    version,
    about = "Piecewise-linear trend analysis of campaign donations and polls"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse contribution files and polls into <out>/store.json.
    Ingest(ConfigArgs),
    /// Fit every stored series; writes fits.json and fits_long.csv.
    Fit(ConfigArgs),
    /// Changepoints, events and lead/lag from the fits; writes report.json.
    Report(ConfigArgs),
    /// ingest, fit and report in sequence.
    Run(ConfigArgs),
    /// Print a seeded piecewise-linear signal as `day,value` CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_days: usize,
    /// Comma-separated knot days, strictly inside the series.
    #[arg(long, value_delimiter = ',')]
    pub knots: Vec<usize>,
    /// Comma-separated slopes, one more than the knots.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    pub slopes: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub intercept: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Warning messages collected during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Warnings(Vec<String>);

impl Warnings {
    pub fn push(&mut self, message: String) {
        self.0.push(message);
    }

    pub fn extend(&mut self, other: Warnings) {
        self.0.extend(other.0);
    }

    pub fn messages(&self) -> &[String] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Runs a command and returns the process exit status.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(warnings) if warnings.is_empty() => EXIT_OK,
        Ok(warnings) => {
            for w in warnings.messages() {
                eprintln!("warning: {w}");
            }
            EXIT_WARNINGS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_UNUSABLE
        }
    }
}

fn dispatch(command: Command) -> Result<Warnings> {
    match command {
        Command::Ingest(args) => ingest::run(&AnalysisConfig::resolve(&args)?),
        Command::Fit(args) => fit::run(&AnalysisConfig::resolve(&args)?),
        Command::Report(args) => report::run(&AnalysisConfig::resolve(&args)?),
        Command::Run(args) => {
            let cfg = AnalysisConfig::resolve(&args)?;
            let mut warnings = ingest::run(&cfg)?;
            warnings.extend(fit::run(&cfg)?);
            warnings.extend(report::run(&cfg)?);
            Ok(warnings)
        }
        Command::Synth(args) => {
            let stdout = std::io::stdout();
            synth(&args, stdout.lock())?;
            Ok(Warnings::default())
        }
    }
}

/// Writes the synthetic signal described by `args` as CSV.
pub fn synth<W: Write>(args: &SynthArgs, out: W) -> Result<()> {
    let spec = SynthSpec {
        n_days: args.n_days,
        knots: args.knots.clone(),
        slopes: args.slopes.clone(),
        intercept: args.intercept,
        noise_sd: args.noise_sd,
        seed: args.seed,
    };
    let values = spec.generate()?;
    write_csv(&values, out)?;
    Ok(())
}

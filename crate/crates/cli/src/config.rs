//! Config file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, ValueEnum};
use joinpoint::fec::ColumnMap;
use joinpoint::trend_filter::{target_df_for_rate, DF_PER_90_DAYS};
use joinpoint::{DateRange, SolverSettings, Tolerance};
use serde::{Deserialize, Serialize};

/// Whether donation metrics are fitted as raw values or as daily shares across candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    #[default]
    Raw,
    Share,
}

/// Column layout of the contribution files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FecLayout {
    #[default]
    Itcont,
    Compact,
}

impl FecLayout {
    pub fn columns(self) -> ColumnMap {
        match self {
            FecLayout::Itcont => ColumnMap::itcont(),
            FecLayout::Compact => ColumnMap::compact(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfRule {
    /// The same df for every series.
    Absolute(usize),
    /// df per 90 days of series length.
    PerNinetyDays(f64),
}

impl DfRule {
    /// Target df for a series of `n` days, capped at `n − 1`.
    pub fn target(self, n: usize) -> usize {
        let df = match self {
            DfRule::Absolute(df) => df,
            DfRule::PerNinetyDays(rate) => target_df_for_rate(n, rate),
        };
        df.min(n - 1)
    }
}

/// Flags shared by the pipeline commands. Any flag given here beats the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML config file; relative paths inside it resolve against its directory.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// First day of the analysis range (YYYY-MM-DD).
    #[arg(long, value_name = "DATE")]
    pub from: Option<NaiveDate>,
    /// Last day of the analysis range, inclusive.
    #[arg(long, value_name = "DATE")]
    pub to: Option<NaiveDate>,
    /// Comma-separated candidate ids.
    #[arg(long, value_delimiter = ',', value_name = "A,B,C")]
    pub candidates: Vec<String>,
    /// Fixed degrees of freedom for every series.
    #[arg(long, value_name = "N", conflicts_with = "df_per_90")]
    pub df: Option<usize>,
    /// Degrees of freedom per 90 days of data (default 12).
    #[arg(long = "df-per-90", value_name = "N")]
    pub df_per_90: Option<f64>,
    /// Fit donation metrics raw or as daily shares across candidates.
    #[arg(long, value_enum)]
    pub normalize: Option<Normalize>,
    /// Event-to-changepoint window in days.
    #[arg(long, value_name = "N")]
    pub window_days: Option<u32>,
    /// Largest poll/donation changepoint gap paired by lead/lag.
    #[arg(long, value_name = "N")]
    pub max_gap_days: Option<u32>,
    /// Recorded in the report; the pipeline itself draws no random numbers.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// The config file: one flat table.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub candidates: Option<Vec<String>>,
    pub committee_map: Option<PathBuf>,
    pub fec_files: Option<Vec<PathBuf>>,
    pub fec_layout: Option<FecLayout>,
    pub polls: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub df: Option<usize>,
    pub df_per_90: Option<f64>,
    pub normalize: Option<Normalize>,
    pub window_days: Option<u32>,
    pub max_gap_days: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Relative duality-gap tolerance.
    pub eps_gap: Option<f64>,
    pub max_iter: Option<usize>,
    /// Relative knot threshold.
    pub tol_knot: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut file: ConfigFile =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        file.committee_map.iter_mut().for_each(join);
        file.fec_files.iter_mut().flatten().for_each(join);
        file.polls.iter_mut().for_each(join);
        file.events.iter_mut().for_each(join);
        file.out.iter_mut().for_each(join);
        Ok(file)
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub range: Option<DateRange>,
    pub candidates: Vec<String>,
    pub committee_map: Option<PathBuf>,
    pub fec_files: Vec<PathBuf>,
    pub fec_layout: FecLayout,
    pub polls: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub df_rule: DfRule,
    pub normalize: Normalize,
    pub window_days: u32,
    pub max_gap_days: u32,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub solver: SolverSettings<f64>,
}

impl AnalysisConfig {
    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        Self::merge(args, file)
    }

    pub fn merge(args: &ConfigArgs, file: ConfigFile) -> Result<Self> {
        let from = args.from.or(file.from);
        let to = args.to.or(file.to);
        let range = match (from, to) {
            (Some(a), Some(b)) => Some(DateRange::new(a, b)?),
            (None, None) => None,
            _ => bail!("both --from and --to are needed to set the date range"),
        };
        let candidates = if args.candidates.is_empty() {
            file.candidates.unwrap_or_default()
        } else {
            args.candidates.clone()
        };
        let candidates: Vec<String> = candidates
            .into_iter()
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();

        let df_rule = match (args.df, args.df_per_90, file.df, file.df_per_90) {
            (Some(df), _, _, _) => DfRule::Absolute(df),
            (None, Some(rate), _, _) => DfRule::PerNinetyDays(rate),
            (None, None, Some(_), Some(_)) => bail!("config sets both df and df_per_90"),
            (None, None, Some(df), None) => DfRule::Absolute(df),
            (None, None, None, Some(rate)) => DfRule::PerNinetyDays(rate),
            (None, None, None, None) => DfRule::PerNinetyDays(DF_PER_90_DAYS),
        };
        match df_rule {
            DfRule::Absolute(df) if df < 2 => bail!("df must be at least 2, got {df}"),
            DfRule::PerNinetyDays(r) if !(r.is_finite() && r > 0.0) => {
                bail!("df per 90 days must be positive, got {r}")
            }
            _ => {}
        }

        let mut solver = SolverSettings::default();
        if let Some(eps) = file.eps_gap {
            solver.eps_gap = Tolerance::Relative(eps);
        }
        if let Some(max_iter) = file.max_iter {
            solver.max_iter = max_iter;
        }
        if let Some(tol) = file.tol_knot {
            solver.tol_knot = Tolerance::Relative(tol);
        }
        solver.validate().context("solver settings")?;

        Ok(Self {
            range,
            candidates,
            committee_map: file.committee_map,
            fec_files: file.fec_files.unwrap_or_default(),
            fec_layout: file.fec_layout.unwrap_or_default(),
            polls: file.polls,
            events: file.events,
            df_rule,
            normalize: args.normalize.or(file.normalize).unwrap_or_default(),
            window_days: args
                .window_days
                .or(file.window_days)
                .unwrap_or(joinpoint::analysis::DEFAULT_EVENT_WINDOW_DAYS),
            max_gap_days: args
                .max_gap_days
                .or(file.max_gap_days)
                .unwrap_or(joinpoint::analysis::DEFAULT_MAX_GAP_DAYS),
            seed: args.seed.or(file.seed),
            out: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("out")),
            solver,
        })
    }
}

//! `report`: changepoints, falling regions, event alignment and poll/donation lead-lag.

use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use joinpoint::analysis::{
    align_events, classify_changepoints, lead_lag, read_events, trend_regions, EventAlignment,
    LabeledChangepoints, LeadLagReport,
};
use joinpoint::{Changepoint64, DateRange};
use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, Normalize};
use crate::fit::{FitsFile, FITS_FILE, POLL_METRIC};
use crate::ingest::{Store, STORE_FILE};
use crate::{write_json, Warnings};

pub const REPORT_FILE: &str = "report.json";
pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// JSON Schema for `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub window_days: u32,
    pub max_gap_days: u32,
    pub normalize: Normalize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub candidate: String,
    pub metric: String,
    pub df: usize,
    pub changepoints: Vec<Changepoint64>,
    pub falling: Vec<DateRange>,
    pub rising: Vec<DateRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadLagEntry {
    pub candidate: String,
    /// Series A; offsets are B − A, so negative values mean the donation metric moved first.
    pub a_metric: String,
    pub b_metric: String,
    #[serde(flatten)]
    pub report: LeadLagReport<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub range: DateRange,
    pub settings: ReportSettings,
    pub series: Vec<SeriesReport>,
    pub events: Vec<EventAlignment<f64>>,
    pub lead_lag: Vec<LeadLagEntry>,
}

impl Report {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Builds the report from fits without touching the file system.
pub fn build(
    cfg: &AnalysisConfig,
    range: DateRange,
    fits: &FitsFile,
    events: &[joinpoint::analysis::Event],
) -> Report {
    let series: Vec<SeriesReport> = fits
        .records
        .iter()
        .map(|r| {
            let fit = r.trend_fit();
            let regions = trend_regions(&fit, r.start_date);
            SeriesReport {
                candidate: r.candidate.clone(),
                metric: r.metric.clone(),
                df: r.df,
                changepoints: classify_changepoints(&fit, r.start_date),
                falling: regions.falling,
                rising: regions.rising,
            }
        })
        .collect();

    let labeled: Vec<LabeledChangepoints<f64>> = series
        .iter()
        .map(|s| LabeledChangepoints {
            series: format!("{}/{}", s.candidate, s.metric),
            changepoints: s.changepoints.clone(),
        })
        .collect();
    let events = align_events(&labeled, events, cfg.window_days);

    let mut lead_lags = Vec::new();
    for poll in series.iter().filter(|s| s.metric == POLL_METRIC) {
        for other in series
            .iter()
            .filter(|s| s.candidate == poll.candidate && s.metric != POLL_METRIC)
        {
            lead_lags.push(LeadLagEntry {
                candidate: poll.candidate.clone(),
                a_metric: poll.metric.clone(),
                b_metric: other.metric.clone(),
                report: lead_lag(&poll.changepoints, &other.changepoints, cfg.max_gap_days),
            });
        }
    }

    Report {
        schema_version: REPORT_SCHEMA_VERSION,
        range,
        settings: ReportSettings {
            window_days: cfg.window_days,
            max_gap_days: cfg.max_gap_days,
            normalize: fits.normalize,
            seed: cfg.seed,
        },
        series,
        events,
        lead_lag: lead_lags,
    }
}

pub fn run(cfg: &AnalysisConfig) -> Result<Warnings> {
    let store = Store::load(&cfg.out.join(STORE_FILE))?;
    let fits = FitsFile::load(&cfg.out.join(FITS_FILE))?;
    let events = match &cfg.events {
        Some(path) => {
            let file =
                File::open(path).with_context(|| format!("opening events {}", path.display()))?;
            read_events(file).with_context(|| format!("reading events {}", path.display()))?
        }
        None => Vec::new(),
    };
    let report = build(cfg, store.range, &fits, &events);
    write_json(&cfg.out.join(REPORT_FILE), &report)?;
    let changepoints: usize = report.series.iter().map(|s| s.changepoints.len()).sum();
    println!(
        "report: {changepoints} changepoint(s) over {} series, {} event(s), {} lead/lag pair set(s)",
        report.series.len(),
        report.events.len(),
        report.lead_lag.len()
    );
    Ok(Warnings::default())
}

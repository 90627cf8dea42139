//! `fit`: one trend fit per candidate × metric.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use joinpoint::analysis::normalize_share;
use joinpoint::fec::DonationMetric;
use joinpoint::timeseries::day_offset;
use joinpoint::{fit_with_target_df, Segment, SolveError, SolverSettings, TimeSeries, TrendFit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, DfRule, Normalize};
use crate::ingest::{Store, STORE_FILE};
use crate::{write_json, Warnings};

pub const FITS_FILE: &str = "fits.json";
pub const FITS_CSV: &str = "fits_long.csv";
pub const POLL_METRIC: &str = "poll";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Change per day.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub candidate: String,
    pub metric: String,
    /// Whether `observed` holds daily shares rather than raw values.
    pub normalized: bool,
    pub start_date: NaiveDate,
    pub lambda: f64,
    pub df: usize,
    pub target_df: usize,
    /// False when the solver hit its iteration cap; the record then holds the best iterate.
    pub converged: bool,
    pub target_unreachable: bool,
    pub duality_gap: f64,
    pub knots: Vec<NaiveDate>,
    pub segments: Vec<SegmentRecord>,
    pub observed: Vec<f64>,
    pub fitted: Vec<f64>,
}

impl FitRecord {
    fn new(
        ts: &TimeSeries,
        metric: &str,
        normalized: bool,
        target_df: usize,
        outcome: FitOutcome,
    ) -> Self {
        let start = ts.start_date();
        let fit = outcome.fit;
        Self {
            candidate: ts.candidate().to_string(),
            metric: metric.to_string(),
            normalized,
            start_date: start,
            lambda: fit.lambda,
            df: fit.df,
            target_df,
            converged: outcome.converged,
            target_unreachable: outcome.target_unreachable,
            duality_gap: fit.duality_gap,
            knots: fit.knots.iter().map(|&k| day_offset(start, k)).collect(),
            segments: fit
                .segments
                .iter()
                .map(|s| SegmentRecord {
                    start: day_offset(start, s.start),
                    end: day_offset(start, s.end),
                    slope: s.slope,
                })
                .collect(),
            observed: ts.values().to_vec(),
            fitted: fit.fitted,
        }
    }

    /// Rebuilds the fit for the changepoint analyses. The dual vector is not stored.
    pub fn trend_fit(&self) -> TrendFit<f64> {
        let index = |d: NaiveDate| (d - self.start_date).num_days() as usize;
        TrendFit {
            lambda: self.lambda,
            fitted: self.fitted.clone(),
            dual: Vec::new(),
            knots: self.knots.iter().map(|&d| index(d)).collect(),
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    start: index(s.start),
                    end: index(s.end),
                    slope: s.slope,
                })
                .collect(),
            df: self.df,
            duality_gap: self.duality_gap,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsFile {
    pub schema_version: u32,
    pub normalize: Normalize,
    pub df_rule: DfRule,
    /// Per donation metric, days on which every candidate's value was zero (share mode only).
    pub share_zero_days: BTreeMap<String, Vec<NaiveDate>>,
    /// Sorted by (candidate, metric).
    pub records: Vec<FitRecord>,
}

impl FitsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("opening fits {}", path.display()))?;
        serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("parsing fits {}", path.display()))
    }
}

struct FitOutcome {
    fit: TrendFit<f64>,
    converged: bool,
    target_unreachable: bool,
}

fn fit_series(
    y: &[f64],
    target_df: usize,
    settings: &SolverSettings<f64>,
) -> Result<FitOutcome, SolveError<f64>> {
    match fit_with_target_df(y, target_df, settings) {
        Ok(t) => Ok(FitOutcome {
            fit: t.fit,
            converged: true,
            target_unreachable: t.target_unreachable,
        }),
        Err(SolveError::NoConvergence { best, .. }) => Ok(FitOutcome {
            fit: *best,
            converged: false,
            target_unreachable: false,
        }),
        Err(e) => Err(e),
    }
}

/// (metric, series, normalized)
type Job = (String, TimeSeries, bool);
type ZeroDays = BTreeMap<String, Vec<NaiveDate>>;

/// The series to fit plus the share-mode zero days per metric.
fn jobs(store: &Store, normalize: Normalize) -> Result<(Vec<Job>, ZeroDays)> {
    let mut jobs = Vec::new();
    let mut zero_days = BTreeMap::new();
    for metric in DonationMetric::ALL {
        let raw: BTreeMap<String, TimeSeries> = store
            .donations
            .iter()
            .map(|d| (d.candidate_id.clone(), d.get(metric).clone()))
            .collect();
        let (series, normalized) = match normalize {
            Normalize::Raw => (raw, false),
            Normalize::Share => {
                let shares = normalize_share(&raw)
                    .with_context(|| format!("normalizing {}", metric.label()))?;
                zero_days.insert(metric.label().to_string(), shares.zero_days);
                (shares.series, true)
            }
        };
        jobs.extend(
            series
                .into_values()
                .map(|ts| (metric.label().to_string(), ts, normalized)),
        );
    }
    jobs.extend(
        store
            .polls
            .iter()
            .map(|ts| (POLL_METRIC.to_string(), ts.clone(), false)),
    );
    Ok((jobs, zero_days))
}

pub fn run(cfg: &AnalysisConfig) -> Result<Warnings> {
    let store = Store::load(&cfg.out.join(STORE_FILE))?;
    let (jobs, share_zero_days) = jobs(&store, cfg.normalize)?;
    if jobs.is_empty() {
        bail!(
            "store {} holds no series to fit",
            cfg.out.join(STORE_FILE).display()
        );
    }
    let mut records: Vec<FitRecord> = jobs
        .par_iter()
        .map(|(metric, ts, normalized)| {
            let target = cfg.df_rule.target(ts.len());
            let outcome = fit_series(ts.values(), target, &cfg.solver)
                .with_context(|| format!("fitting {}/{metric}", ts.candidate()))?;
            Ok(FitRecord::new(ts, metric, *normalized, target, outcome))
        })
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| (&a.candidate, &a.metric).cmp(&(&b.candidate, &b.metric)));

    let mut warnings = Warnings::default();
    for r in &records {
        if !r.converged {
            warnings.push(format!(
                "{}/{}: solver did not converge (gap {:.3e}); best iterate kept",
                r.candidate, r.metric, r.duality_gap
            ));
        }
        if r.target_unreachable {
            warnings.push(format!(
                "{}/{}: target df {} unreachable, got {}",
                r.candidate, r.metric, r.target_df, r.df
            ));
        }
    }

    let fits = FitsFile {
        schema_version: 1,
        normalize: cfg.normalize,
        df_rule: cfg.df_rule,
        share_zero_days,
        records,
    };
    write_json(&cfg.out.join(FITS_FILE), &fits)?;
    write_long_csv(&cfg.out.join(FITS_CSV), &fits.records)?;
    println!("fitted {} series", fits.records.len());
    Ok(warnings)
}

fn write_long_csv(path: &Path, records: &[FitRecord]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["date", "candidate", "metric", "observed", "fitted"])?;
    for r in records {
        for (i, (obs, fit)) in r.observed.iter().zip(&r.fitted).enumerate() {
            let date = day_offset(r.start_date, i).to_string();
            w.write_record([
                &date,
                &r.candidate,
                &r.metric,
                &obs.to_string(),
                &fit.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

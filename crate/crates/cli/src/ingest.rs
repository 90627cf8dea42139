//! `ingest`: contribution files and polls into one analysis store.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use joinpoint::fec::{
    parse_fec_file, read_committee_map, ColumnMap, CommitteeMap, DailyDonationMetrics,
    IngestSummary, MetricsAccumulator,
};
use joinpoint::polls::{poll_series, read_poll_points, PollError};
use joinpoint::{DateRange, TimeSeries};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::{write_json, Warnings};

pub const STORE_SCHEMA_VERSION: u32 = 1;
pub const STORE_FILE: &str = "store.json";
pub const SUMMARY_FILE: &str = "ingest_summary.json";

/// Everything the later stages need, in one self-describing file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Store {
    pub schema_version: u32,
    pub range: DateRange,
    pub candidates: Vec<String>,
    /// One entry per candidate with at least one contribution, in candidate order.
    pub donations: Vec<DailyDonationMetrics>,
    pub polls: Vec<TimeSeries>,
}

impl Store {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("opening store {}", path.display()))?;
        let store: Store = serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("parsing store {}", path.display()))?;
        if store.schema_version != STORE_SCHEMA_VERSION {
            bail!(
                "store {} has schema version {}, expected {STORE_SCHEMA_VERSION}",
                path.display(),
                store.schema_version
            );
        }
        Ok(store)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSummary {
    pub path: PathBuf,
    #[serde(flatten)]
    pub counts: IngestSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<FileSummary>,
    pub total: IngestSummary,
    pub donation_series: usize,
    pub poll_series: usize,
    pub warnings: Vec<String>,
}

pub fn run(cfg: &AnalysisConfig) -> Result<Warnings> {
    let Some(range) = cfg.range else {
        bail!("ingest needs a date range (--from/--to or from/to in the config)");
    };
    if cfg.candidates.is_empty() {
        bail!("ingest needs at least one candidate");
    }
    let mut warnings = Warnings::default();

    let map_path = cfg
        .committee_map
        .as_deref()
        .context("ingest needs committee_map in the config")?;
    let committees = read_committee_map(
        File::open(map_path)
            .with_context(|| format!("opening committee map {}", map_path.display()))?,
    )
    .with_context(|| format!("reading committee map {}", map_path.display()))?;

    let columns = cfg.fec_layout.columns();
    let shards: Vec<(FileSummary, MetricsAccumulator)> = cfg
        .fec_files
        .par_iter()
        .map(|path| ingest_file(path, &columns, &committees))
        .collect::<Result<_>>()?;
    let mut acc = MetricsAccumulator::new();
    let mut total = IngestSummary::default();
    let mut files = Vec::with_capacity(shards.len());
    for (summary, shard) in shards {
        if summary.counts.malformed > 0 {
            warnings.push(format!(
                "{}: skipped {} malformed line(s)",
                summary.path.display(),
                summary.counts.malformed
            ));
        }
        if summary.counts.lines_total == 0 {
            warnings.push(format!("{}: no contribution lines", summary.path.display()));
        }
        total.merge(&summary.counts);
        acc.merge(shard);
        files.push(summary);
    }
    if cfg.fec_files.is_empty() {
        warnings.push("no contribution files configured".to_string());
    }

    let known: Vec<&str> = acc.candidates().collect();
    let mut donations = Vec::new();
    for candidate in &cfg.candidates {
        if known.contains(&candidate.as_str()) {
            donations.push(acc.metrics(candidate, range)?);
        } else {
            warnings.push(format!("no contributions for candidate {candidate}"));
        }
    }

    let polls = match &cfg.polls {
        Some(path) => load_polls(path, &cfg.candidates, range, &mut warnings)?,
        None => Vec::new(),
    };

    let store = Store {
        schema_version: STORE_SCHEMA_VERSION,
        range,
        candidates: cfg.candidates.clone(),
        donations,
        polls,
    };
    let report = IngestReport {
        files,
        total,
        donation_series: store.donations.len() * 4,
        poll_series: store.polls.len(),
        warnings: warnings.messages().to_vec(),
    };
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_json(&cfg.out.join(STORE_FILE), &store)?;
    write_json(&cfg.out.join(SUMMARY_FILE), &report)?;
    println!(
        "ingested {} line(s): {} parsed, {} malformed, {} unmapped; {} donation and {} poll series",
        total.lines_total,
        total.parsed,
        total.malformed,
        total.unmapped,
        report.donation_series,
        report.poll_series
    );
    Ok(warnings)
}

fn ingest_file(
    path: &Path,
    columns: &ColumnMap,
    committees: &CommitteeMap,
) -> Result<(FileSummary, MetricsAccumulator)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = parse_fec_file(BufReader::new(file), columns.clone(), committees);
    let mut acc = MetricsAccumulator::new();
    for record in reader.by_ref() {
        acc.add(&record.with_context(|| format!("reading {}", path.display()))?);
    }
    let summary = FileSummary {
        path: path.to_path_buf(),
        counts: reader.summary(),
    };
    Ok((summary, acc))
}

fn load_polls(
    path: &Path,
    candidates: &[String],
    range: DateRange,
    warnings: &mut Warnings,
) -> Result<Vec<TimeSeries>> {
    let file = File::open(path).with_context(|| format!("opening polls {}", path.display()))?;
    let points =
        read_poll_points(file).with_context(|| format!("reading polls {}", path.display()))?;
    let mut out = Vec::new();
    for candidate in candidates {
        match poll_series(&points, candidate, range) {
            Ok(ts) => out.push(ts),
            Err(PollError::UnknownCandidate(c)) => {
                warnings.push(format!("no poll rows for candidate {c}"))
            }
            Err(e) => return Err(e).with_context(|| format!("poll series for {candidate}")),
        }
    }
    Ok(out)
}

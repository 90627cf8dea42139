//! Cross-candidate normalization and changepoint analyses on fitted trends.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::timeseries::{day_offset, DateRange, SeriesError, TimeSeries};
use crate::trend_filter::TrendFit;
use crate::Scalar;

/// Default half-width of the window matching changepoints to events.
pub const DEFAULT_EVENT_WINDOW_DAYS: u32 = 10;
/// Default largest gap for pairing changepoints across two series.
pub const DEFAULT_MAX_GAP_DAYS: u32 = 14;

#[derive(thiserror::Error, Debug)]
pub enum AnalysisError {
    #[error("series for {candidate} is not on the shared grid")]
    GridMismatch { candidate: String },
    #[error("negative value {value} for {candidate} on {date}")]
    InvalidValue {
        candidate: String,
        date: NaiveDate,
        value: f64,
    },
    #[error("events CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("events CSV: expected header \"date,label\"")]
    EventsHeader,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Per-candidate daily shares and the days on which every candidate had zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareNormalized {
    pub series: BTreeMap<String, TimeSeries>,
    pub zero_days: Vec<NaiveDate>,
}

/// Divides each candidate's value by that day's total over all supplied candidates.
/// Days where the total is zero get 0 for everyone and are listed in `zero_days`.
pub fn normalize_share(
    series_by_candidate: &BTreeMap<String, TimeSeries>,
) -> Result<ShareNormalized, AnalysisError> {
    let Some(first) = series_by_candidate.values().next() else {
        return Ok(ShareNormalized {
            series: BTreeMap::new(),
            zero_days: Vec::new(),
        });
    };
    let (start, n) = (first.start_date(), first.len());
    for (candidate, ts) in series_by_candidate {
        if ts.start_date() != start || ts.len() != n {
            return Err(AnalysisError::GridMismatch {
                candidate: candidate.clone(),
            });
        }
        if let Some((date, value)) = ts.iter().find(|&(_, v)| v < 0.0) {
            return Err(AnalysisError::InvalidValue {
                candidate: candidate.clone(),
                date,
                value,
            });
        }
    }
    let totals: Vec<f64> = (0..n)
        .map(|i| series_by_candidate.values().map(|ts| ts.values()[i]).sum())
        .collect();
    let zero_days = totals
        .iter()
        .enumerate()
        .filter(|(_, &t)| t == 0.0)
        .map(|(i, _)| day_offset(start, i))
        .collect();
    let series = series_by_candidate
        .iter()
        .map(|(candidate, ts)| {
            let shares = ts
                .values()
                .iter()
                .zip(&totals)
                .map(|(&v, &t)| if t == 0.0 { 0.0 } else { v / t })
                .collect();
            Ok((candidate.clone(), ts.with_values(shares)?))
        })
        .collect::<Result<_, SeriesError>>()?;
    Ok(ShareNormalized { series, zero_days })
}

/// Direction of the slope change at a changepoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    /// Slope increases (drawn blue).
    Up,
    /// Slope decreases (drawn red).
    Down,
}

impl Direction {
    pub fn color(self) -> &'static str {
        match self {
            Direction::Up => "blue",
            Direction::Down => "red",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Changepoint<T> {
    /// Day offset from the series start.
    pub index: usize,
    pub date: NaiveDate,
    pub slope_before: T,
    pub slope_after: T,
    pub direction: Direction,
}

/// One changepoint per knot of `fit`, with the slopes of the adjacent segments.
pub fn classify_changepoints<T: Scalar>(
    fit: &TrendFit<T>,
    start_date: NaiveDate,
) -> Vec<Changepoint<T>> {
    fit.knot_slopes()
        .map(|(index, before, after)| Changepoint {
            index,
            date: day_offset(start_date, index),
            slope_before: before,
            slope_after: after,
            direction: if after > before {
                Direction::Up
            } else {
                Direction::Down
            },
        })
        .collect()
}

/// Maximal falling (slope < 0) and rising (slope ≥ 0) stretches of a fit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendRegions {
    pub falling: Vec<DateRange>,
    pub rising: Vec<DateRange>,
}

/// Splits the fit span into falling and rising date ranges. A knot day belongs to the
/// segment that starts there, so the ranges tile the span without overlap.
pub fn trend_regions<T: Scalar>(fit: &TrendFit<T>, start_date: NaiveDate) -> TrendRegions {
    let mut falling = Vec::new();
    let mut rising = Vec::new();
    let n = fit.fitted.len();
    let mut run: Option<(bool, usize)> = None;
    for (k, seg) in fit.segments.iter().enumerate() {
        let is_falling = seg.slope < T::zero();
        let first_day = seg.start;
        match run {
            Some((f, _)) if f == is_falling => {}
            Some((f, begin)) => {
                push_region(
                    &mut falling,
                    &mut rising,
                    f,
                    start_date,
                    begin,
                    first_day - 1,
                );
                run = Some((is_falling, first_day));
            }
            None => run = Some((is_falling, first_day)),
        }
        if k + 1 == fit.segments.len() {
            let (f, begin) = run.expect("run started");
            push_region(&mut falling, &mut rising, f, start_date, begin, n - 1);
        }
    }
    TrendRegions { falling, rising }
}

fn push_region(
    falling: &mut Vec<DateRange>,
    rising: &mut Vec<DateRange>,
    is_falling: bool,
    start_date: NaiveDate,
    first: usize,
    last: usize,
) {
    let range = DateRange::new(day_offset(start_date, first), day_offset(start_date, last))
        .expect("ordered indices");
    if is_falling {
        falling.push(range);
    } else {
        rising.push(range);
    }
}

/// An external dated event, e.g. a debate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub date: NaiveDate,
    pub label: String,
}

/// Reads a CSV with header `date,label`.
pub fn read_events<R: Read>(input: R) -> Result<Vec<Event>, AnalysisError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    if reader.headers()?.iter().collect::<Vec<_>>() != ["date", "label"] {
        return Err(AnalysisError::EventsHeader);
    }
    reader
        .deserialize()
        .map(|r| r.map_err(AnalysisError::from))
        .collect()
}

/// Changepoints of one named series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledChangepoints<T> {
    pub series: String,
    pub changepoints: Vec<Changepoint<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMatch<T> {
    pub series: String,
    pub changepoint: Changepoint<T>,
    /// `changepoint.date − event.date` in days.
    pub offset_days: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAlignment<T> {
    pub event: Event,
    pub matches: Vec<EventMatch<T>>,
}

/// For each event, every changepoint within `window_days` of it, nearest first.
/// Ties are ordered by signed offset, then series label, then date.
pub fn align_events<T: Scalar>(
    series: &[LabeledChangepoints<T>],
    events: &[Event],
    window_days: u32,
) -> Vec<EventAlignment<T>> {
    events
        .iter()
        .map(|event| {
            let mut matches: Vec<EventMatch<T>> = series
                .iter()
                .flat_map(|s| {
                    s.changepoints.iter().filter_map(|cp| {
                        let offset_days = (cp.date - event.date).num_days();
                        (offset_days.unsigned_abs() <= u64::from(window_days)).then(|| EventMatch {
                            series: s.series.clone(),
                            changepoint: *cp,
                            offset_days,
                        })
                    })
                })
                .collect();
            matches.sort_by(|a, b| {
                a.offset_days
                    .abs()
                    .cmp(&b.offset_days.abs())
                    .then(a.offset_days.cmp(&b.offset_days))
                    .then_with(|| a.series.cmp(&b.series))
                    .then(a.changepoint.date.cmp(&b.changepoint.date))
            });
            EventAlignment {
                event: event.clone(),
                matches,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadLagPair<T> {
    pub a: Changepoint<T>,
    pub b: Changepoint<T>,
    /// `b.date − a.date`; negative when B's changepoint comes first.
    pub offset_days: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadLagReport<T> {
    pub pairs: Vec<LeadLagPair<T>>,
    pub unmatched_a: Vec<Changepoint<T>>,
    pub unmatched_b: Vec<Changepoint<T>>,
    pub median_offset: Option<f64>,
}

/// Greedy closest-first pairing of changepoints from two series.
///
/// Repeatedly pairs the unpaired `(a, b)` with the smallest date gap not exceeding
/// `max_gap_days`. Equal gaps go to the pair whose earlier date is earliest, then whose
/// later date is earliest. The rule ignores which side is A, so swapping the inputs
/// swaps the pairs.
pub fn lead_lag<T: Scalar>(
    cps_a: &[Changepoint<T>],
    cps_b: &[Changepoint<T>],
    max_gap_days: u32,
) -> LeadLagReport<T> {
    let mut candidates: Vec<(i64, usize, usize)> = Vec::new();
    for (i, a) in cps_a.iter().enumerate() {
        for (j, b) in cps_b.iter().enumerate() {
            let gap = (b.date - a.date).num_days();
            if gap.unsigned_abs() <= u64::from(max_gap_days) {
                candidates.push((gap, i, j));
            }
        }
    }
    let key = |&(gap, i, j): &(i64, usize, usize)| {
        let (a, b) = (cps_a[i].date, cps_b[j].date);
        (gap.abs(), a.min(b), a.max(b), a)
    };
    candidates.sort_by_key(key);

    let mut used_a = vec![false; cps_a.len()];
    let mut used_b = vec![false; cps_b.len()];
    let mut pairs = Vec::new();
    for (gap, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push(LeadLagPair {
                a: cps_a[i],
                b: cps_b[j],
                offset_days: gap,
            });
        }
    }
    pairs.sort_by(|p, q| p.a.date.cmp(&q.a.date).then(p.b.date.cmp(&q.b.date)));

    let unmatched = |cps: &[Changepoint<T>], used: &[bool]| {
        cps.iter()
            .zip(used)
            .filter(|(_, &u)| !u)
            .map(|(c, _)| *c)
            .collect()
    };
    let median_offset = median(pairs.iter().map(|p| p.offset_days as f64).collect());
    LeadLagReport {
        unmatched_a: unmatched(cps_a, &used_a),
        unmatched_b: unmatched(cps_b, &used_b),
        pairs,
        median_offset,
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

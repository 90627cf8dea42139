//! Daily-grid time series shared by ingestion, fitting and analysis.
//!
//! A [`TimeSeries`] holds exactly one finite value per consecutive calendar day,
//! starting at `start_date`. Irregular or sub-daily data has to be brought onto the
//! grid with [`resample_daily`] first.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

/// Minimum number of days in a series; the solver needs one interior point.
pub const MIN_SERIES_LEN: usize = 3;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series has {len} values, at least {MIN_SERIES_LEN} are required")]
    TooShort { len: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("date range is inverted: {start} > {end}")]
    InvertedRange { start: NaiveDate, end: NaiveDate },
    #[error("no input points")]
    EmptyInput,
    #[error("duplicate observation for {0}")]
    DuplicateDate(NaiveDate),
    #[error("observation on {date} lies outside {range}")]
    OutOfRange { date: NaiveDate, range: DateRange },
    #[error("missing observations from {first} to {last} ({days} days)")]
    MissingDay {
        first: NaiveDate,
        last: NaiveDate,
        days: usize,
    },
    #[error("range {requested} leaves fewer than {MIN_SERIES_LEN} days of the series")]
    RangeTooNarrow { requested: DateRange },
}

/// Inclusive calendar date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    start: NaiveDate,
    end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, SeriesError> {
        if start > end {
            return Err(SeriesError::InvertedRange { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    /// Number of days covered, both ends included.
    pub fn num_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn intersect(&self, other: &DateRange) -> Option<DateRange> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then_some(DateRange { start, end })
    }

    /// Offset of `date` from the range start, if it lies inside.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.contains(date)
            .then(|| (date - self.start).num_days() as usize)
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.num_days()).map(|i| day_offset(self.start, i))
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..={}", self.start, self.end)
    }
}

/// `start + offset` days.
pub fn day_offset(start: NaiveDate, offset: usize) -> NaiveDate {
    start
        .checked_add_days(Days::new(offset as u64))
        .expect("date within chrono range")
}

/// How [`resample_daily`] treats days without an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Missing days are 0.0.
    Zero,
    /// Linear interpolation between the nearest observed neighbours, flat beyond the
    /// first and last observation. A run of more than `max_gap_days` missing days is an
    /// error when the limit is set.
    Interpolate { max_gap_days: Option<usize> },
    /// Any missing day is an error.
    Strict,
}

impl FillPolicy {
    /// Policy used for aggregated poll averages.
    pub const POLLS: FillPolicy = FillPolicy::Interpolate {
        max_gap_days: Some(7),
    };
}

/// One metric for one candidate, one value per day with no gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start_date: NaiveDate,
    values: Vec<f64>,
    label: String,
    candidate: String,
}

impl TimeSeries {
    pub fn new(start_date: NaiveDate, values: Vec<f64>) -> Result<Self, SeriesError> {
        if values.len() < MIN_SERIES_LEN {
            return Err(SeriesError::TooShort { len: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { index });
        }
        Ok(Self {
            start_date,
            values,
            label: String::new(),
            candidate: String::new(),
        })
    }

    pub fn labeled(mut self, candidate: impl Into<String>, label: impl Into<String>) -> Self {
        self.candidate = candidate.into();
        self.label = label.into();
        self
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn end_date(&self) -> NaiveDate {
        day_offset(self.start_date, self.values.len() - 1)
    }

    pub fn range(&self) -> DateRange {
        DateRange {
            start: self.start_date,
            end: self.end_date(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false for a constructed series.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn candidate(&self) -> &str {
        &self.candidate
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        day_offset(self.start_date, index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.date_at(i), v))
    }

    /// Same grid and labels with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, SeriesError> {
        Ok(TimeSeries::new(self.start_date, values)?.labeled(&self.candidate, &self.label))
    }
}

/// Places dated observations on the daily grid covering `range`.
pub fn resample_daily(
    points: &[(NaiveDate, f64)],
    range: DateRange,
    fill: FillPolicy,
) -> Result<TimeSeries, SeriesError> {
    if points.is_empty() {
        return Err(SeriesError::EmptyInput);
    }
    let mut observed = BTreeMap::new();
    for &(date, value) in points {
        let index = range
            .index_of(date)
            .ok_or(SeriesError::OutOfRange { date, range })?;
        if !value.is_finite() {
            return Err(SeriesError::NonFinite { index });
        }
        if observed.insert(index, value).is_some() {
            return Err(SeriesError::DuplicateDate(date));
        }
    }

    let n = range.num_days();

    let values = match fill {
        FillPolicy::Zero => {
            let mut values = vec![0.0; n];
            for (&i, &v) in &observed {
                values[i] = v;
            }
            values
        }
        FillPolicy::Strict => {
            if let Some((first, days)) = missing_runs(&observed, n).into_iter().next() {
                return Err(missing(range, first, days));
            }
            observed.values().copied().collect()
        }
        FillPolicy::Interpolate { max_gap_days } => {
            if let Some(limit) = max_gap_days {
                if let Some((first, days)) = missing_runs(&observed, n)
                    .into_iter()
                    .find(|&(_, days)| days > limit)
                {
                    return Err(missing(range, first, days));
                }
            }
            interpolate(&observed, n)
        }
    };
    TimeSeries::new(range.start, values)
}

fn missing(range: DateRange, first: usize, days: usize) -> SeriesError {
    SeriesError::MissingDay {
        first: day_offset(range.start, first),
        last: day_offset(range.start, first + days - 1),
        days,
    }
}

/// (first missing index, run length) for every run of unobserved days.
fn missing_runs(observed: &BTreeMap<usize, f64>, n: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut next = 0;
    for &i in observed.keys() {
        if i > next {
            runs.push((next, i - next));
        }
        next = i + 1;
    }
    if next < n {
        runs.push((next, n - next));
    }
    runs
}

fn interpolate(observed: &BTreeMap<usize, f64>, n: usize) -> Vec<f64> {
    let pts: Vec<(usize, f64)> = observed.iter().map(|(&i, &v)| (i, v)).collect();
    let (first_i, first_v) = pts[0];
    let (last_i, last_v) = pts[pts.len() - 1];
    let mut values = vec![0.0; n];
    values[..=first_i].fill(first_v);
    values[last_i..].fill(last_v);
    for w in pts.windows(2) {
        let ((i0, v0), (i1, v1)) = (w[0], w[1]);
        let span = (i1 - i0) as f64;
        for (k, slot) in values[i0..=i1].iter_mut().enumerate() {
            let t = k as f64 / span;
            *slot = v0 + t * (v1 - v0);
        }
        // keep observed values bit-exact at their dates
        values[i1] = v1;
        values[i0] = v0;
    }
    values
}

/// Sub-series covering the intersection of `range` with the series span.
pub fn restrict(ts: &TimeSeries, range: DateRange) -> Result<TimeSeries, SeriesError> {
    let too_narrow = SeriesError::RangeTooNarrow { requested: range };
    let common = ts.range().intersect(&range).ok_or(too_narrow.clone())?;
    if common.num_days() < MIN_SERIES_LEN {
        return Err(too_narrow);
    }
    let offset = (common.start - ts.start_date).num_days() as usize;
    let values = ts.values[offset..offset + common.num_days()].to_vec();
    Ok(TimeSeries::new(common.start, values)?.labeled(&ts.candidate, &ts.label))
}

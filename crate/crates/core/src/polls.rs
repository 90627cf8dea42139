//! Pre-aggregated national polling averages.

use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::timeseries::{resample_daily, DateRange, FillPolicy, SeriesError, TimeSeries};

#[derive(thiserror::Error, Debug)]
pub enum PollError {
    #[error("poll CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("poll CSV: expected header \"date,candidate,pct\"")]
    Header,
    #[error("line {line}: pct {pct} outside [0, 100]")]
    InvalidValue { line: u64, pct: f64 },
    #[error("line {line}: empty candidate")]
    EmptyCandidate { line: u64 },
    #[error("no poll rows for candidate {0:?} in range")]
    UnknownCandidate(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// One candidate-day observation of the national average, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollPoint {
    pub date: NaiveDate,
    pub candidate: String,
    pub pct: f64,
}

/// Reads and validates every row of a `date,candidate,pct` CSV.
pub fn read_poll_points<R: Read>(input: R) -> Result<Vec<PollPoint>, PollError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    if reader.headers()?.iter().collect::<Vec<_>>() != ["date", "candidate", "pct"] {
        return Err(PollError::Header);
    }
    let mut points = Vec::new();
    for row in reader.deserialize::<PollPoint>() {
        let point = row?;
        // header is line 1
        let line = points.len() as u64 + 2;
        if !(0.0..=100.0).contains(&point.pct) {
            return Err(PollError::InvalidValue {
                line,
                pct: point.pct,
            });
        }
        if point.candidate.is_empty() {
            return Err(PollError::EmptyCandidate { line });
        }
        points.push(point);
    }
    Ok(points)
}

/// Daily poll series for `candidate` over `range`: linear interpolation between
/// observations, failing on gaps longer than 7 days. Candidate names match
/// case-insensitively.
pub fn load_poll_series<R: Read>(
    input: R,
    candidate: &str,
    range: DateRange,
) -> Result<TimeSeries, PollError> {
    poll_series(&read_poll_points(input)?, candidate, range)
}

/// [`load_poll_series`] over rows already in memory.
pub fn poll_series(
    points: &[PollPoint],
    candidate: &str,
    range: DateRange,
) -> Result<TimeSeries, PollError> {
    let obs: Vec<(NaiveDate, f64)> = points
        .iter()
        .filter(|p| p.candidate.eq_ignore_ascii_case(candidate) && range.contains(p.date))
        .map(|p| (p.date, p.pct))
        .collect();
    if obs.is_empty() {
        return Err(PollError::UnknownCandidate(candidate.to_string()));
    }
    Ok(resample_daily(&obs, range, FillPolicy::POLLS)?.labeled(candidate, "poll"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range() -> DateRange {
        DateRange::new(
            NaiveDate::from_ymd_opt(2019, 6, 1).unwrap(),
            NaiveDate::from_ymd_opt(2019, 6, 3).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn interpolates_between_rows() {
        let csv =
            "date,candidate,pct\n2019-06-01,biden,30\n2019-06-03,biden,32\n2019-06-02,warren,12\n";
        let ts = load_poll_series(csv.as_bytes(), "biden", range()).unwrap();
        assert_eq!(ts.values(), &[30.0, 31.0, 32.0]);
        assert_eq!(ts.label(), "poll");
    }

    #[test]
    fn unknown_candidate() {
        let csv = "date,candidate,pct\n2019-06-01,warren,30\n";
        assert!(matches!(
            load_poll_series(csv.as_bytes(), "biden", range()),
            Err(PollError::UnknownCandidate(c)) if c == "biden"
        ));
    }

    #[test]
    fn out_of_bounds_pct() {
        let csv = "date,candidate,pct\n2019-06-01,biden,30\n2019-06-02,biden,105\n";
        assert!(matches!(
            load_poll_series(csv.as_bytes(), "biden", range()),
            Err(PollError::InvalidValue { line: 3, .. })
        ));
    }

    #[test]
    fn long_gap_is_an_error() {
        let csv = "date,candidate,pct\n2019-06-01,biden,30\n2019-06-12,biden,28\n";
        let r = DateRange::new(
            NaiveDate::from_ymd_opt(2019, 6, 1).unwrap(),
            NaiveDate::from_ymd_opt(2019, 6, 12).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            load_poll_series(csv.as_bytes(), "biden", r),
            Err(PollError::Series(SeriesError::MissingDay { days: 10, .. }))
        ));
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            load_poll_series("day,who,value\n".as_bytes(), "biden", range()),
            Err(PollError::Header)
        ));
    }
}

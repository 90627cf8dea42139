//! FEC individual-contribution ingestion and the four daily donation metrics.
//!
//! Bulk files are delimiter-separated text (pipe by default) with one contribution per
//! line. Committees are mapped to candidates through an explicit table; donors are
//! identified by normalized name plus 5-digit zip.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read};
use std::ops::RangeInclusive;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::timeseries::{DateRange, SeriesError, TimeSeries};

#[derive(thiserror::Error, Debug)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("committee map: {0}")]
    CommitteeMap(#[from] csv::Error),
    #[error("committee map: expected header \"committee_id,candidate_id\"")]
    CommitteeMapHeader,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Whether the amount column holds dollars or integer cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmountUnit {
    #[default]
    Dollars,
    Cents,
}

/// Field layout of a contribution file. Positions are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub delimiter: char,
    pub committee: usize,
    pub name: usize,
    pub zip: usize,
    pub date: usize,
    pub amount: usize,
    /// Exact number of fields per line; when unset a line only needs to reach the
    /// highest configured position.
    pub field_count: Option<usize>,
    pub amount_unit: AmountUnit,
    /// Years outside this range are treated as malformed dates.
    pub plausible_years: RangeInclusive<i32>,
}

impl ColumnMap {
    /// Layout of the FEC `itcont` individual-contributions bulk file (21 fields).
    pub fn itcont() -> Self {
        Self {
            delimiter: '|',
            committee: 0,
            name: 7,
            zip: 10,
            date: 13,
            amount: 14,
            field_count: Some(21),
            amount_unit: AmountUnit::Dollars,
            plausible_years: 2017..=2021,
        }
    }

    /// Five-field layout `committee|name|zip|date|amount`.
    pub fn compact() -> Self {
        Self {
            committee: 0,
            name: 1,
            zip: 2,
            date: 3,
            amount: 4,
            field_count: Some(5),
            ..Self::itcont()
        }
    }

    fn max_position(&self) -> usize {
        self.committee
            .max(self.name)
            .max(self.zip)
            .max(self.date)
            .max(self.amount)
    }
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self::itcont()
    }
}

/// One itemized contribution attributed to a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DonationRecord {
    pub candidate_id: String,
    pub donor_name_raw: String,
    pub zip: String,
    pub date: NaiveDate,
    /// Negative for refunds.
    pub amount_cents: i64,
}

impl DonationRecord {
    pub fn donor_key(&self) -> DonorKey {
        DonorKey::new(&self.donor_name_raw, &self.zip)
    }
}

/// Donor identity: normalized name plus the first five zip digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DonorKey {
    pub name_norm: String,
    pub zip5: String,
}

impl DonorKey {
    pub const MISSING_ZIP: &'static str = "00000";

    pub fn new(raw_name: &str, zip: &str) -> Self {
        let digits: String = zip.trim().chars().take(5).collect();
        let zip5 = if digits.len() == 5 && digits.bytes().all(|b| b.is_ascii_digit()) {
            digits
        } else {
            Self::MISSING_ZIP.to_string()
        };
        Self {
            name_norm: normalize_donor_name(raw_name),
            zip5,
        }
    }
}

/// Uppercase, keep only letters, digits and spaces, collapse whitespace.
pub fn normalize_donor_name(raw: &str) -> String {
    let kept: String = raw
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_uppercase)
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Line counts reported after parsing a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub lines_total: u64,
    pub parsed: u64,
    pub malformed: u64,
    pub unmapped: u64,
}

impl IngestSummary {
    pub fn merge(&mut self, other: &IngestSummary) {
        self.lines_total += other.lines_total;
        self.parsed += other.parsed;
        self.malformed += other.malformed;
        self.unmapped += other.unmapped;
    }
}

/// Committee id → candidate id.
pub type CommitteeMap = HashMap<String, String>;

#[derive(Deserialize)]
struct CommitteeRow {
    committee_id: String,
    candidate_id: String,
}

/// Reads a CSV with header `committee_id,candidate_id`.
pub fn read_committee_map<R: Read>(input: R) -> Result<CommitteeMap, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?;
    if headers.iter().collect::<Vec<_>>() != ["committee_id", "candidate_id"] {
        return Err(IngestError::CommitteeMapHeader);
    }
    let mut map = CommitteeMap::new();
    for row in reader.deserialize::<CommitteeRow>() {
        let row = row?;
        map.insert(row.committee_id, row.candidate_id);
    }
    Ok(map)
}

/// Streaming parser over a contribution file. Malformed and unmapped lines are skipped
/// and counted in [`FecReader::summary`].
pub struct FecReader<'m, R> {
    input: R,
    columns: ColumnMap,
    committees: &'m CommitteeMap,
    summary: IngestSummary,
    buf: Vec<u8>,
}

/// Parses a contribution stream; see [`FecReader`].
pub fn parse_fec_file<R: BufRead>(
    input: R,
    columns: ColumnMap,
    committees: &CommitteeMap,
) -> FecReader<'_, R> {
    FecReader {
        input,
        columns,
        committees,
        summary: IngestSummary::default(),
        buf: Vec::new(),
    }
}

enum LineOutcome {
    Record(DonationRecord),
    Malformed,
    Unmapped,
}

impl<R: BufRead> FecReader<'_, R> {
    pub fn summary(&self) -> IngestSummary {
        self.summary
    }

    fn parse_line(&self, line: &str) -> LineOutcome {
        let cols = &self.columns;
        let fields: Vec<&str> = line.split(cols.delimiter).collect();
        let count_ok = fields.len() > cols.max_position()
            && cols.field_count.is_none_or(|n| fields.len() == n);
        if !count_ok {
            return LineOutcome::Malformed;
        }
        let Some(date) =
            parse_mmddyyyy(fields[cols.date]).filter(|d| cols.plausible_years.contains(&d.year()))
        else {
            return LineOutcome::Malformed;
        };
        let Some(amount_cents) = parse_amount(fields[cols.amount], cols.amount_unit) else {
            return LineOutcome::Malformed;
        };
        let Some(candidate) = self.committees.get(fields[cols.committee].trim()) else {
            return LineOutcome::Unmapped;
        };
        LineOutcome::Record(DonationRecord {
            candidate_id: candidate.clone(),
            donor_name_raw: fields[cols.name].to_string(),
            zip: fields[cols.zip].trim().to_string(),
            date,
            amount_cents,
        })
    }
}

impl<R: BufRead> Iterator for FecReader<'_, R> {
    type Item = Result<DonationRecord, std::io::Error>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e)),
            }
            // bulk files are not reliably UTF-8
            let line = String::from_utf8_lossy(&self.buf);
            let line = line.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            self.summary.lines_total += 1;
            match self.parse_line(line) {
                LineOutcome::Record(r) => {
                    self.summary.parsed += 1;
                    return Some(Ok(r));
                }
                LineOutcome::Malformed => self.summary.malformed += 1,
                LineOutcome::Unmapped => self.summary.unmapped += 1,
            }
        }
    }
}

fn parse_mmddyyyy(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let month = s[0..2].parse().ok()?;
    let day = s[2..4].parse().ok()?;
    let year = s[4..8].parse().ok()?;
    NaiveDate::from_ymd_opt(year, month, day)
}

fn parse_amount(s: &str, unit: AmountUnit) -> Option<i64> {
    let s = s.trim();
    match unit {
        AmountUnit::Cents => s.parse().ok(),
        AmountUnit::Dollars => {
            let (negative, body) = match s.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, s),
            };
            let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
            if whole.is_empty()
                || !whole.bytes().all(|b| b.is_ascii_digit())
                || frac.len() > 2
                || !frac.bytes().all(|b| b.is_ascii_digit())
            {
                return None;
            }
            let cents = whole.parse::<i64>().ok()?.checked_mul(100)?
                + format!("{frac:0<2}").parse::<i64>().ok()?;
            Some(if negative { -cents } else { cents })
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct DonorHistory {
    first: Option<NaiveDate>,
    daily_cents: BTreeMap<NaiveDate, i64>,
}

/// Mergeable per-candidate donation state. Records can be added in any order and
/// accumulators built from disjoint shards can be merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsAccumulator {
    donors: HashMap<String, HashMap<DonorKey, DonorHistory>>,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a record; non-positive amounts are ignored.
    pub fn add(&mut self, record: &DonationRecord) {
        if record.amount_cents <= 0 {
            return;
        }
        let history = self
            .donors
            .entry(record.candidate_id.clone())
            .or_default()
            .entry(record.donor_key())
            .or_default();
        history.first = Some(history.first.map_or(record.date, |f| f.min(record.date)));
        *history.daily_cents.entry(record.date).or_insert(0) += record.amount_cents;
    }

    pub fn merge(&mut self, other: MetricsAccumulator) {
        for (candidate, donors) in other.donors {
            let mine = self.donors.entry(candidate).or_default();
            for (key, theirs) in donors {
                let h = mine.entry(key).or_default();
                h.first = match (h.first, theirs.first) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                for (date, cents) in theirs.daily_cents {
                    *h.daily_cents.entry(date).or_insert(0) += cents;
                }
            }
        }
    }

    pub fn candidates(&self) -> impl Iterator<Item = &str> {
        self.donors.keys().map(String::as_str)
    }

    /// The four daily series for `candidate_id` over `range`. New-donor status uses every
    /// record seen, including those before `range.start()`.
    pub fn metrics(
        &self,
        candidate_id: &str,
        range: DateRange,
    ) -> Result<DailyDonationMetrics, IngestError> {
        let n = range.num_days();
        let mut donors = vec![0.0; n];
        let mut new_donors = vec![0.0; n];
        let mut amount_cents = vec![0i64; n];
        let mut new_amount_cents = vec![0i64; n];
        if let Some(histories) = self.donors.get(candidate_id) {
            for h in histories.values() {
                for (&date, &cents) in h.daily_cents.range(range.start()..=range.end()) {
                    let i = range.index_of(date).expect("date inside range");
                    donors[i] += 1.0;
                    amount_cents[i] += cents;
                    if h.first == Some(date) {
                        new_donors[i] += 1.0;
                        new_amount_cents[i] += cents;
                    }
                }
            }
        }
        let dollars = |c: Vec<i64>| c.into_iter().map(|c| c as f64 / 100.0).collect();
        let series = |values: Vec<f64>, metric: DonationMetric| {
            TimeSeries::new(range.start(), values).map(|s| s.labeled(candidate_id, metric.label()))
        };
        Ok(DailyDonationMetrics {
            candidate_id: candidate_id.to_string(),
            donors: series(donors, DonationMetric::Donors)?,
            new_donors: series(new_donors, DonationMetric::NewDonors)?,
            amount: series(dollars(amount_cents), DonationMetric::Amount)?,
            new_donor_amount: series(dollars(new_amount_cents), DonationMetric::NewDonorAmount)?,
        })
    }
}

/// The four per-candidate donation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DonationMetric {
    Donors,
    NewDonors,
    Amount,
    NewDonorAmount,
}

impl DonationMetric {
    pub const ALL: [DonationMetric; 4] = [
        DonationMetric::Donors,
        DonationMetric::NewDonors,
        DonationMetric::Amount,
        DonationMetric::NewDonorAmount,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DonationMetric::Donors => "donors",
            DonationMetric::NewDonors => "new_donors",
            DonationMetric::Amount => "amount",
            DonationMetric::NewDonorAmount => "new_donor_amount",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyDonationMetrics {
    pub candidate_id: String,
    /// Distinct donors per day.
    pub donors: TimeSeries,
    /// Donors giving to this candidate for the first time that day.
    pub new_donors: TimeSeries,
    /// Dollars per day.
    pub amount: TimeSeries,
    /// Dollars per day from first-time donors.
    pub new_donor_amount: TimeSeries,
}

impl DailyDonationMetrics {
    pub fn get(&self, metric: DonationMetric) -> &TimeSeries {
        match metric {
            DonationMetric::Donors => &self.donors,
            DonationMetric::NewDonors => &self.new_donors,
            DonationMetric::Amount => &self.amount,
            DonationMetric::NewDonorAmount => &self.new_donor_amount,
        }
    }
}

/// Computes the four metrics for one candidate from an unordered record set.
pub fn daily_donation_metrics<'a>(
    records: impl IntoIterator<Item = &'a DonationRecord>,
    candidate_id: &str,
    range: DateRange,
) -> Result<DailyDonationMetrics, IngestError> {
    let mut acc = MetricsAccumulator::new();
    for r in records {
        if r.candidate_id == candidate_id {
            acc.add(r);
        }
    }
    acc.metrics(candidate_id, range)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, m, d).unwrap()
    }

    fn table() -> CommitteeMap {
        [("C00696948".to_string(), "SANDERS".to_string())].into()
    }

    #[test]
    fn parses_compact_line() {
        let input = "C00696948|SMITH, JOHN|229031234|06152019|50\n";
        let t = table();
        let mut reader = parse_fec_file(input.as_bytes(), ColumnMap::compact(), &t);
        let record = reader.next().unwrap().unwrap();
        assert_eq!(
            record,
            DonationRecord {
                candidate_id: "SANDERS".into(),
                donor_name_raw: "SMITH, JOHN".into(),
                zip: "229031234".into(),
                date: date(6, 15),
                amount_cents: 5000,
            }
        );
        assert!(reader.next().is_none());
        assert_eq!(
            reader.summary(),
            IngestSummary {
                lines_total: 1,
                parsed: 1,
                malformed: 0,
                unmapped: 0
            }
        );
    }

    #[test]
    fn counts_malformed_and_unmapped() {
        let input = "C00696948|SMITH|22903\n\
                     C00000001|DOE, JANE|10001|06152019|25\n\
                     C00696948|DOE, JANE|10001|13152019|25\n\
                     C00696948|DOE, JANE|10001|06152012|25\n\
                     C00696948|DOE, JANE|10001|06152019|2x5\n\
                     \n\
                     C00696948|DOE, JANE|10001|06162019|-25\n";
        let t = table();
        let mut reader = parse_fec_file(input.as_bytes(), ColumnMap::compact(), &t);
        let records: Vec<_> = reader.by_ref().map(Result::unwrap).collect();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].amount_cents, -2500);
        assert_eq!(
            reader.summary(),
            IngestSummary {
                lines_total: 6,
                parsed: 1,
                malformed: 4,
                unmapped: 1
            }
        );
    }

    #[test]
    fn itcont_layout() {
        let line = "C00696948|N|M3|P2020|201907309158082261|15|IND|OBRIEN, MARY|BOSTON|MA|021161234|SELF|RETIRED|07152019|27||X|||SA17A|4073582\n";
        let t = table();
        let rec = parse_fec_file(line.as_bytes(), ColumnMap::itcont(), &t)
            .next()
            .unwrap()
            .unwrap();
        assert_eq!(rec.donor_key().zip5, "02116");
        assert_eq!(rec.date, date(7, 15));
        assert_eq!(rec.amount_cents, 2700);
    }

    #[test]
    fn amounts() {
        assert_eq!(parse_amount("50", AmountUnit::Dollars), Some(5000));
        assert_eq!(parse_amount("12.5", AmountUnit::Dollars), Some(1250));
        assert_eq!(parse_amount("-3.07", AmountUnit::Dollars), Some(-307));
        assert_eq!(parse_amount("1.234", AmountUnit::Dollars), None);
        assert_eq!(parse_amount("1250", AmountUnit::Cents), Some(1250));
        assert_eq!(parse_amount("12.50", AmountUnit::Cents), None);
    }

    #[test]
    fn name_normalization() {
        assert_eq!(normalize_donor_name("Smith, John Q."), "SMITH JOHN Q");
        assert_eq!(normalize_donor_name("  o'brien,   mary "), "OBRIEN MARY");
        assert_eq!(normalize_donor_name(""), "");
    }

    #[test]
    fn donor_keys() {
        assert_eq!(DonorKey::new("a", "229031234").zip5, "22903");
        assert_eq!(DonorKey::new("a", "").zip5, "00000");
        assert_eq!(DonorKey::new("a", "2290").zip5, "00000");
    }

    #[test]
    fn committee_map_csv() {
        let map =
            read_committee_map("committee_id,candidate_id\nC1,SANDERS\nC2, WARREN\n".as_bytes())
                .unwrap();
        assert_eq!(map["C2"], "WARREN");
        assert!(matches!(
            read_committee_map("cmte,cand\nC1,X\n".as_bytes()),
            Err(IngestError::CommitteeMapHeader)
        ));
    }

    fn rec(candidate: &str, name: &str, d: NaiveDate, dollars: i64) -> DonationRecord {
        DonationRecord {
            candidate_id: candidate.into(),
            donor_name_raw: name.into(),
            zip: "12345".into(),
            date: d,
            amount_cents: dollars * 100,
        }
    }

    #[test]
    fn same_day_gifts_count_once() {
        let d1 = date(6, 1);
        let range = DateRange::new(d1, date(6, 3)).unwrap();
        let records = [rec("X", "A", d1, 10), rec("X", "a.", d1, 15)];
        let m = daily_donation_metrics(&records, "X", range).unwrap();
        assert_eq!(m.donors.values(), &[1.0, 0.0, 0.0]);
        assert_eq!(m.amount.values(), &[25.0, 0.0, 0.0]);
        assert_eq!(m.new_donor_amount.values(), &[25.0, 0.0, 0.0]);
    }

    #[test]
    fn refunds_are_excluded() {
        let d1 = date(6, 1);
        let range = DateRange::new(d1, date(6, 3)).unwrap();
        let m = daily_donation_metrics(&[rec("X", "A", d1, -50)], "X", range).unwrap();
        for metric in DonationMetric::ALL {
            assert!(m.get(metric).values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn lookback_before_range() {
        let range = DateRange::new(date(5, 15), date(5, 17)).unwrap();
        let records = [rec("X", "A", date(4, 20), 5), rec("X", "A", date(5, 16), 7)];
        let m = daily_donation_metrics(&records, "X", range).unwrap();
        assert_eq!(m.donors.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(m.new_donors.values(), &[0.0, 0.0, 0.0]);
    }
}

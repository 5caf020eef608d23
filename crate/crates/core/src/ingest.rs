//! Record model, CSV ingestion and cohort-level data diagnostics.
//!
//! Input rows follow the header `participant_id,timestamp,measure,value,session_flag`.
//! Timestamps are normalised to UTC at parse time; anything that needs a
//! calendar day (daily aggregation, week folding, usage grids) goes through
//! [`RecordSet::local_date`], which applies the single cohort UTC offset.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::calendar::{iso_week_fold, WeekIndex};
use crate::error::IngestError;

pub const CSV_HEADER: &str = "participant_id,timestamp,measure,value,session_flag";

/// Cohort offset used when none is configured (UTC+09:00).
pub const DEFAULT_UTC_OFFSET_SECS: i32 = 9 * 3600;

pub fn default_offset() -> FixedOffset {
    FixedOffset::east_opt(DEFAULT_UTC_OFFSET_SECS).expect("valid offset")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    WakingHr,
    SleepHr,
    SleepHrv,
    TotalSleepDuration,
    DeepSleepPct,
    LightSleepPct,
    HighActivitySeconds,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::WakingHr,
        Measure::SleepHr,
        Measure::SleepHrv,
        Measure::TotalSleepDuration,
        Measure::DeepSleepPct,
        Measure::LightSleepPct,
        Measure::HighActivitySeconds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::WakingHr => "waking_hr",
            Measure::SleepHr => "sleep_hr",
            Measure::SleepHrv => "sleep_hrv",
            Measure::TotalSleepDuration => "total_sleep_duration",
            Measure::DeepSleepPct => "deep_sleep_pct",
            Measure::LightSleepPct => "light_sleep_pct",
            Measure::HighActivitySeconds => "high_activity_seconds",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Measure::WakingHr | Measure::SleepHr => "1/min",
            Measure::SleepHrv => "ms",
            Measure::TotalSleepDuration | Measure::HighActivitySeconds => "s",
            Measure::DeepSleepPct | Measure::LightSleepPct => "%",
        }
    }

    /// Nocturnal measures carry the annual seasonal swing.
    pub fn is_sleep_vital(self) -> bool {
        matches!(self, Measure::SleepHr | Measure::SleepHrv)
    }

    /// Checks the physiological range for this kind. `Err` holds the reason.
    pub fn validate(self, value: f64) -> Result<(), &'static str> {
        if !value.is_finite() {
            return Err("non-finite value");
        }
        let ok = match self {
            Measure::WakingHr | Measure::SleepHr => value > 20.0 && value < 250.0,
            Measure::SleepHrv => value > 0.0 && value < 500.0,
            Measure::DeepSleepPct | Measure::LightSleepPct => (0.0..=100.0).contains(&value),
            Measure::TotalSleepDuration | Measure::HighActivitySeconds => value >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err("value out of range for measure")
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown measure `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRecord {
    pub participant_id: Arc<str>,
    pub timestamp: DateTime<Utc>,
    pub measure: Measure,
    pub value: f64,
    pub session_flag: bool,
}

/// Unit tag carried by a series so normalisation cannot be applied twice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesUnit {
    Native,
    Mad,
}

/// Time-ordered values of one measure for one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSeries {
    pub participant_id: Arc<str>,
    pub measure: Measure,
    pub unit: SeriesUnit,
    points: Vec<(DateTime<Utc>, f64)>,
}

impl MeasureSeries {
    /// Builds a series from points already in strictly increasing time order.
    pub fn new(
        participant_id: impl Into<Arc<str>>,
        measure: Measure,
        points: Vec<(DateTime<Utc>, f64)>,
    ) -> Result<Self, IngestError> {
        let participant_id = participant_id.into();
        if points.is_empty() {
            return Err(IngestError::EmptySeries {
                participant: participant_id.to_string(),
                measure,
            });
        }
        if let Some(index) = points.windows(2).position(|w| w[0].0 >= w[1].0) {
            return Err(IngestError::Unsorted { index: index + 1 });
        }
        Ok(Self {
            participant_id,
            measure,
            unit: SeriesUnit::Native,
            points,
        })
    }

    /// Sorts the points first; duplicate timestamps are still an error.
    pub fn from_unsorted(
        participant_id: impl Into<Arc<str>>,
        measure: Measure,
        mut points: Vec<(DateTime<Utc>, f64)>,
    ) -> Result<Self, IngestError> {
        points.sort_by_key(|p| p.0);
        Self::new(participant_id, measure, points)
    }

    pub fn points(&self) -> &[(DateTime<Utc>, f64)] {
        &self.points
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_time(&self) -> DateTime<Utc> {
        self.points[0].0
    }

    pub fn last_time(&self) -> DateTime<Utc> {
        self.points[self.points.len() - 1].0
    }

    /// Same timestamps, values replaced point-wise.
    pub(crate) fn map_values(&self, unit: SeriesUnit, f: impl Fn(DateTime<Utc>, f64) -> f64) -> Self {
        Self {
            participant_id: self.participant_id.clone(),
            measure: self.measure,
            unit,
            points: self.points.iter().map(|&(t, v)| (t, f(t, v))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based line number in the source (the header is line 1).
    pub line: u64,
    pub reason: String,
    /// Participant and measure when those fields parsed.
    pub key: Option<(String, Measure)>,
}

/// Immutable, indexed collection of validated records.
#[derive(Debug, Clone)]
pub struct RecordSet {
    records: Vec<MeasureRecord>,
    index: BTreeMap<(Arc<str>, Measure), Vec<usize>>,
    range: Option<(DateTime<Utc>, DateTime<Utc>)>,
    offset: FixedOffset,
}

type SeenKey = (Arc<str>, Measure, DateTime<Utc>);

impl RecordSet {
    /// Builds the index. Duplicate (participant, measure, timestamp) records
    /// after the first are returned as rejects.
    pub fn from_records(records: Vec<MeasureRecord>) -> (Self, Vec<MeasureRecord>) {
        let mut kept = Vec::with_capacity(records.len());
        let mut dups = Vec::new();
        let mut seen: std::collections::HashSet<SeenKey> = Default::default();
        for r in records {
            if seen.insert((r.participant_id.clone(), r.measure, r.timestamp)) {
                kept.push(r);
            } else {
                dups.push(r);
            }
        }
        (Self::build(kept), dups)
    }

    fn build(records: Vec<MeasureRecord>) -> Self {
        let mut index: BTreeMap<(Arc<str>, Measure), Vec<usize>> = BTreeMap::new();
        let mut range: Option<(DateTime<Utc>, DateTime<Utc>)> = None;
        for (i, r) in records.iter().enumerate() {
            index.entry((r.participant_id.clone(), r.measure)).or_default().push(i);
            range = Some(match range {
                None => (r.timestamp, r.timestamp),
                Some((lo, hi)) => (lo.min(r.timestamp), hi.max(r.timestamp)),
            });
        }
        Self {
            records,
            index,
            range,
            offset: default_offset(),
        }
    }

    pub fn with_utc_offset(mut self, offset: FixedOffset) -> Self {
        self.offset = offset;
        self
    }

    pub fn utc_offset(&self) -> FixedOffset {
        self.offset
    }

    pub fn records(&self) -> &[MeasureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// First and last timestamp in the set.
    pub fn date_range(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        self.range
    }

    pub fn participants(&self) -> Vec<Arc<str>> {
        let set: BTreeSet<Arc<str>> = self.index.keys().map(|k| k.0.clone()).collect();
        set.into_iter().collect()
    }

    pub fn measures_for(&self, participant: &str) -> Vec<Measure> {
        self.index
            .keys()
            .filter(|k| &*k.0 == participant)
            .map(|k| k.1)
            .collect()
    }

    pub fn local_date(&self, ts: DateTime<Utc>) -> NaiveDate {
        ts.with_timezone(&self.offset).date_naive()
    }

    /// Records for one (participant, measure) pair, in input order.
    pub fn records_for<'a>(
        &'a self,
        participant: &str,
        measure: Measure,
    ) -> impl Iterator<Item = &'a MeasureRecord> + 'a {
        let key: (Arc<str>, Measure) = (Arc::from(participant), measure);
        self.index
            .get(&key)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.records[i])
    }

    /// Merges several sets parsed independently. Duplicates across inputs
    /// are dropped in favour of the earlier set and returned.
    pub fn merge(sets: Vec<RecordSet>) -> (RecordSet, Vec<MeasureRecord>) {
        let offset = sets.first().map(|s| s.offset).unwrap_or_else(default_offset);
        let all = sets.into_iter().flat_map(|s| s.records).collect();
        let (merged, dups) = RecordSet::from_records(all);
        (merged.with_utc_offset(offset), dups)
    }
}

/// Identifier of an accepted input layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsvSchema {
    #[default]
    MeasureRecordsV1,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub records: RecordSet,
    pub rejections: Vec<Rejection>,
    pub rows_seen: usize,
}

impl ParseOutcome {
    pub fn accepted(&self) -> usize {
        self.records.len()
    }
}

fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, &'static str> {
    let ts = DateTime::parse_from_rfc3339(s).map_err(|_| "unparseable timestamp")?;
    if ts.timestamp_subsec_nanos() != 0 {
        return Err("sub-second timestamp");
    }
    Ok(ts.with_timezone(&Utc))
}

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Parses a measurement CSV. A bad header is fatal; bad rows are collected
/// in the rejection report.
pub fn parse_records(mut source: impl Read, schema: CsvSchema) -> Result<ParseOutcome, IngestError> {
    let CsvSchema::MeasureRecordsV1 = schema;
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| IngestError::Encoding(e.to_string()))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(h) => h?,
        None => {
            return Err(IngestError::Header {
                expected: CSV_HEADER.into(),
                found: String::new(),
            })
        }
    };
    let found = header.iter().map(str::trim).collect::<Vec<_>>().join(",");
    if found != CSV_HEADER {
        return Err(IngestError::Header {
            expected: CSV_HEADER.into(),
            found,
        });
    }

    let mut records = Vec::new();
    let mut lines = Vec::new();
    let mut rejections = Vec::new();
    let mut rows_seen = 0;
    let mut interned: HashMap<String, Arc<str>> = HashMap::new();

    for row in rows {
        let row = row?;
        rows_seen += 1;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let mut reject = |reason: &str, key: Option<(String, Measure)>| {
            rejections.push(Rejection {
                line,
                reason: reason.to_string(),
                key,
            })
        };
        if row.len() != 5 {
            reject("wrong field count", None);
            continue;
        }
        let participant = row[0].trim();
        if participant.is_empty() {
            reject("empty participant_id", None);
            continue;
        }
        let measure = match row[2].trim().parse::<Measure>() {
            Ok(m) => m,
            Err(_) => {
                reject("unknown measure", None);
                continue;
            }
        };
        let key = Some((participant.to_string(), measure));
        let timestamp = match parse_timestamp(row[1].trim()) {
            Ok(t) => t,
            Err(reason) => {
                reject(reason, key);
                continue;
            }
        };
        let value = match row[3].trim().parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                reject("unparseable value", key);
                continue;
            }
        };
        if let Err(reason) = measure.validate(value) {
            reject(reason, key);
            continue;
        }
        let session_flag = match row[4].trim() {
            "true" => true,
            "false" => false,
            _ => {
                reject("session_flag must be true or false", key);
                continue;
            }
        };
        let participant_id = interned
            .entry(participant.to_string())
            .or_insert_with(|| Arc::from(participant))
            .clone();
        records.push(MeasureRecord {
            participant_id,
            timestamp,
            measure,
            value,
            session_flag,
        });
        lines.push(line);
    }

    // Duplicate keys: keep the first occurrence, report the later one.
    let mut seen: std::collections::HashSet<SeenKey> = Default::default();
    let mut kept = Vec::with_capacity(records.len());
    for (r, line) in records.into_iter().zip(lines) {
        if seen.insert((r.participant_id.clone(), r.measure, r.timestamp)) {
            kept.push(r);
        } else {
            rejections.push(Rejection {
                line,
                reason: "duplicate timestamp".into(),
                key: Some((r.participant_id.to_string(), r.measure)),
            });
        }
    }
    rejections.sort_by_key(|r| r.line);

    Ok(ParseOutcome {
        records: RecordSet::build(kept),
        rejections,
        rows_seen,
    })
}

/// Writes records in the input schema with canonical UTC timestamps.
pub fn write_records(rs: &RecordSet, out: impl Write) -> Result<(), IngestError> {
    write_record_slice(rs.records(), out)
}

pub fn write_record_slice(records: &[MeasureRecord], out: impl Write) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.write_record([
            &*r.participant_id,
            &format_timestamp(r.timestamp),
            r.measure.as_str(),
            &r.value.to_string(),
            if r.session_flag { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rejections(rejections: &[Rejection], out: impl Write) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["line", "reason"])?;
    for r in rejections {
        w.write_record([r.line.to_string(), r.reason.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Sorted series for one participant and measure. With `include_sessions`
/// false, records flagged as live workout/guided sessions are dropped.
pub fn series_for(
    rs: &RecordSet,
    participant: &str,
    measure: Measure,
    include_sessions: bool,
) -> Result<MeasureSeries, IngestError> {
    let mut points: Vec<(DateTime<Utc>, f64)> = rs
        .records_for(participant, measure)
        .filter(|r| include_sessions || !r.session_flag)
        .map(|r| (r.timestamp, r.value))
        .collect();
    if points.is_empty() {
        return Err(IngestError::EmptySeries {
            participant: participant.to_string(),
            measure,
        });
    }
    points.sort_by_key(|p| p.0);
    MeasureSeries::new(participant, measure, points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeekShare {
    pub total: usize,
    pub shares: BTreeMap<String, f64>,
    pub max_share: f64,
}

/// Per folded calendar week, the fraction of that week's records each
/// participant contributes.
pub fn weekly_data_share(rs: &RecordSet) -> BTreeMap<WeekIndex, WeekShare> {
    let mut counts: BTreeMap<WeekIndex, BTreeMap<&str, usize>> = BTreeMap::new();
    for r in rs.records() {
        let week = iso_week_fold(rs.local_date(r.timestamp));
        *counts.entry(week).or_default().entry(&r.participant_id).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(week, per)| {
            let total: usize = per.values().sum();
            let shares: BTreeMap<String, f64> = per
                .into_iter()
                .map(|(p, c)| (p.to_string(), c as f64 / total as f64))
                .collect();
            let max_share = shares.values().copied().fold(0.0, f64::max);
            (
                week,
                WeekShare {
                    total,
                    shares,
                    max_share,
                },
            )
        })
        .collect()
}

/// Day × participant availability grid (local dates, row-major by day).
#[derive(Debug, Clone, PartialEq)]
pub struct UsageMatrix {
    pub dates: Vec<NaiveDate>,
    pub participants: Vec<Arc<str>>,
    cells: Vec<bool>,
}

impl UsageMatrix {
    pub fn get(&self, date: usize, participant: usize) -> bool {
        self.cells[date * self.participants.len() + participant]
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.dates.first()?;
        let i = (date - first).num_days();
        (i >= 0 && (i as usize) < self.dates.len()).then_some(i as usize)
    }

    pub fn participant_index(&self, participant: &str) -> Option<usize> {
        self.participants.iter().position(|p| &**p == participant)
    }

    pub fn count_true(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// CSV with one row per date and one 0/1 column per participant.
    pub fn write_csv(&self, out: impl Write) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.participants.iter().map(|p| p.to_string()));
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut row = vec![d.to_string()];
            row.extend((0..self.participants.len()).map(|j| if self.get(i, j) { "1" } else { "0" }.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn usage_matrix(rs: &RecordSet) -> UsageMatrix {
    let participants = rs.participants();
    let Some((lo, hi)) = rs.date_range() else {
        return UsageMatrix {
            dates: Vec::new(),
            participants,
            cells: Vec::new(),
        };
    };
    let first = rs.local_date(lo);
    let last = rs.local_date(hi);
    let n_days = (last - first).num_days() as usize + 1;
    let dates: Vec<NaiveDate> = (0..n_days).map(|i| first + Duration::days(i as i64)).collect();
    let col: HashMap<&str, usize> = participants.iter().enumerate().map(|(i, p)| (&**p, i)).collect();
    let mut cells = vec![false; n_days * participants.len()];
    for r in rs.records() {
        let d = (rs.local_date(r.timestamp) - first).num_days() as usize;
        cells[d * participants.len() + col[&*r.participant_id]] = true;
    }
    UsageMatrix {
        dates,
        participants,
        cells,
    }
}

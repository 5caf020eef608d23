//! Academic-period calendar and calendar-week folding.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CalendarError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodLabel {
    Semester,
    SpringBreak,
    SummerBreak,
    GoldenWeek,
    SpringExam,
    SummerExam,
    SpringPreExam,
    SummerPreExam,
    NewYear,
}

impl PeriodLabel {
    /// Table column order; `Semester` is the reference level.
    pub const ALL: [PeriodLabel; 9] = [
        PeriodLabel::Semester,
        PeriodLabel::SpringBreak,
        PeriodLabel::SummerBreak,
        PeriodLabel::GoldenWeek,
        PeriodLabel::SpringExam,
        PeriodLabel::SummerExam,
        PeriodLabel::SpringPreExam,
        PeriodLabel::SummerPreExam,
        PeriodLabel::NewYear,
    ];

    pub const DEFAULT_PRECEDENCE: [PeriodLabel; 9] = [
        PeriodLabel::SpringExam,
        PeriodLabel::SummerExam,
        PeriodLabel::SpringPreExam,
        PeriodLabel::SummerPreExam,
        PeriodLabel::NewYear,
        PeriodLabel::GoldenWeek,
        PeriodLabel::SpringBreak,
        PeriodLabel::SummerBreak,
        PeriodLabel::Semester,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PeriodLabel::Semester => "semester",
            PeriodLabel::SpringBreak => "spring_break",
            PeriodLabel::SummerBreak => "summer_break",
            PeriodLabel::GoldenWeek => "golden_week",
            PeriodLabel::SpringExam => "spring_exam",
            PeriodLabel::SummerExam => "summer_exam",
            PeriodLabel::SpringPreExam => "spring_pre_exam",
            PeriodLabel::SummerPreExam => "summer_pre_exam",
            PeriodLabel::NewYear => "new_year",
        }
    }

    fn index(self) -> usize {
        PeriodLabel::ALL.iter().position(|&l| l == self).unwrap()
    }

    /// The pre-exam label derived from an exam label.
    pub fn pre_exam(self) -> Option<PeriodLabel> {
        match self {
            PeriodLabel::SpringExam => Some(PeriodLabel::SpringPreExam),
            PeriodLabel::SummerExam => Some(PeriodLabel::SummerPreExam),
            _ => None,
        }
    }

    /// Coarse grouping used for plot shading.
    pub fn kind(self) -> PeriodKind {
        match self {
            PeriodLabel::SpringExam | PeriodLabel::SummerExam => PeriodKind::Exam,
            PeriodLabel::SpringPreExam | PeriodLabel::SummerPreExam => PeriodKind::PreExam,
            PeriodLabel::SpringBreak | PeriodLabel::SummerBreak => PeriodKind::Break,
            PeriodLabel::GoldenWeek => PeriodKind::GoldenWeek,
            PeriodLabel::NewYear => PeriodKind::NewYear,
            PeriodLabel::Semester => PeriodKind::Semester,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodKind {
    Exam,
    PreExam,
    Break,
    GoldenWeek,
    NewYear,
    Semester,
}

impl fmt::Display for PeriodLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PeriodLabel {
    type Err = CalendarError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PeriodLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| CalendarError::UnknownLabel(s.to_string()))
    }
}

/// Folded ISO week of year, 1..=52 (ISO week 53 is merged into 52).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct WeekIndex(u8);

impl WeekIndex {
    pub fn new(week: u8) -> Option<Self> {
        (1..=52).contains(&week).then_some(Self(week))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = WeekIndex> {
        (1..=52).map(WeekIndex)
    }
}

impl TryFrom<u8> for WeekIndex {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        WeekIndex::new(v).ok_or_else(|| format!("week {v} outside 1..=52"))
    }
}

impl From<WeekIndex> for u8 {
    fn from(w: WeekIndex) -> u8 {
        w.0
    }
}

impl fmt::Display for WeekIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "week_{:02}", self.0)
    }
}

pub fn iso_week_fold(date: NaiveDate) -> WeekIndex {
    WeekIndex(date.iso_week().week().min(52) as u8)
}

/// Folds an instant using the local date at `offset`.
pub fn fold_timestamp(ts: DateTime<Utc>, offset: FixedOffset) -> WeekIndex {
    iso_week_fold(ts.with_timezone(&offset).date_naive())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PeriodRow {
    pub label: PeriodLabel,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// On-disk period definition (TOML).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PeriodConfig {
    #[serde(default, rename = "period")]
    pub periods: Vec<PeriodRow>,
    #[serde(default = "default_precedence")]
    pub precedence: Vec<PeriodLabel>,
    /// Add pre-exam intervals covering the 14 days before each exam start.
    #[serde(default = "yes")]
    pub derive_pre_exams: bool,
    /// Plot-only marker dates (e.g. grade releases).
    #[serde(default)]
    pub annotations: Vec<NaiveDate>,
}

fn default_precedence() -> Vec<PeriodLabel> {
    PeriodLabel::DEFAULT_PRECEDENCE.to_vec()
}

fn yes() -> bool {
    true
}

fn d(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("literal date")
}

/// Academic-year intervals, 2021 through 2023.
pub const ACADEMIC_PERIODS: &[(PeriodLabel, &str, &str)] = &[
    (PeriodLabel::SpringExam, "2021-01-21", "2021-02-03"),
    (PeriodLabel::SpringExam, "2022-01-20", "2022-02-02"),
    (PeriodLabel::SpringExam, "2023-01-23", "2023-02-03"),
    (PeriodLabel::SpringBreak, "2021-02-04", "2021-04-07"),
    (PeriodLabel::SpringBreak, "2022-02-03", "2022-04-07"),
    (PeriodLabel::SpringBreak, "2023-02-04", "2023-04-07"),
    (PeriodLabel::GoldenWeek, "2021-04-29", "2021-05-05"),
    (PeriodLabel::GoldenWeek, "2022-04-29", "2022-05-05"),
    (PeriodLabel::GoldenWeek, "2023-04-29", "2023-05-05"),
    (PeriodLabel::SummerExam, "2021-07-23", "2021-08-04"),
    (PeriodLabel::SummerExam, "2022-07-22", "2022-08-04"),
    (PeriodLabel::SummerExam, "2023-07-24", "2023-08-04"),
    (PeriodLabel::SummerBreak, "2021-08-05", "2021-09-23"),
    (PeriodLabel::SummerBreak, "2022-08-05", "2022-09-23"),
    (PeriodLabel::SummerBreak, "2023-08-05", "2023-09-23"),
    (PeriodLabel::NewYear, "2021-12-15", "2022-01-07"),
    (PeriodLabel::NewYear, "2022-12-15", "2023-01-07"),
];

impl PeriodConfig {
    pub fn academic_default() -> Self {
        Self {
            periods: ACADEMIC_PERIODS
                .iter()
                .map(|&(label, s, e)| PeriodRow {
                    label,
                    start: d(s),
                    end: d(e),
                })
                .collect(),
            precedence: default_precedence(),
            derive_pre_exams: true,
            annotations: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CalendarError> {
        toml::from_str(text).map_err(|e| CalendarError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("period config serialises")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodEntry {
    pub label: PeriodLabel,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl PeriodEntry {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone)]
pub struct PeriodCalendar {
    entries: Vec<PeriodEntry>,
    /// rank[label index]; lower wins.
    rank: [usize; 9],
    annotations: Vec<NaiveDate>,
}

const PRE_EXAM_DAYS: i64 = 14;

pub fn build_calendar(config: &PeriodConfig) -> Result<PeriodCalendar, CalendarError> {
    let mut seen = [false; 9];
    for &l in &config.precedence {
        if std::mem::replace(&mut seen[l.index()], true) {
            return Err(CalendarError::Precedence(format!("`{l}` listed twice")));
        }
    }
    if let Some(missing) = PeriodLabel::ALL.iter().find(|l| !seen[l.index()]) {
        return Err(CalendarError::Precedence(format!("`{missing}` missing")));
    }
    let mut rank = [0; 9];
    for (r, &l) in config.precedence.iter().enumerate() {
        rank[l.index()] = r;
    }

    let mut entries = Vec::new();
    for row in &config.periods {
        if row.start > row.end {
            return Err(CalendarError::InvertedInterval {
                label: row.label.to_string(),
                start: row.start,
                end: row.end,
            });
        }
        entries.push(PeriodEntry {
            label: row.label,
            start: row.start,
            end: row.end,
        });
    }
    if config.derive_pre_exams {
        let derived: Vec<PeriodEntry> = entries
            .iter()
            .filter_map(|e| {
                e.label.pre_exam().map(|label| PeriodEntry {
                    label,
                    start: e.start - Duration::days(PRE_EXAM_DAYS),
                    end: e.start - Duration::days(1),
                })
            })
            .collect();
        entries.extend(derived);
    }
    let mut annotations = config.annotations.clone();
    annotations.sort();
    Ok(PeriodCalendar {
        entries,
        rank,
        annotations,
    })
}

impl PeriodCalendar {
    pub fn academic_default() -> Self {
        build_calendar(&PeriodConfig::academic_default()).expect("default calendar is valid")
    }

    pub fn entries(&self) -> &[PeriodEntry] {
        &self.entries
    }

    pub fn annotations(&self) -> &[NaiveDate] {
        &self.annotations
    }

    /// Single label for `date`; overlaps go to the label ranked first in
    /// the precedence list, uncovered dates are `Semester`.
    pub fn assign_period(&self, date: NaiveDate) -> PeriodLabel {
        self.entries
            .iter()
            .filter(|e| e.contains(date))
            .map(|e| e.label)
            .min_by_key(|l| self.rank[l.index()])
            .unwrap_or(PeriodLabel::Semester)
    }
}

pub fn assign_period(cal: &PeriodCalendar, date: NaiveDate) -> PeriodLabel {
    cal.assign_period(date)
}

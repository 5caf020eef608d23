use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{FixedOffset, NaiveDate};

use crate::ingest::{Measure, MeasureSeries, SeriesUnit};

/// One value per local date.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub participant_id: Arc<str>,
    pub measure: Measure,
    pub unit: SeriesUnit,
    pub points: Vec<(NaiveDate, f64)>,
}

/// Daily maximum per local date (at the cohort `offset`).
pub fn daily_max(s: &MeasureSeries, offset: FixedOffset) -> DailySeries {
    let mut by_day: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for &(t, v) in s.points() {
        let day = t.with_timezone(&offset).date_naive();
        by_day.entry(day).and_modify(|m| *m = m.max(v)).or_insert(v);
    }
    DailySeries {
        participant_id: s.participant_id.clone(),
        measure: s.measure,
        unit: s.unit,
        points: by_day.into_iter().collect(),
    }
}

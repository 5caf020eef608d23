//! Parse a measurement CSV, report rejections, and look at per-participant
//! series, weekly data shares and the usage grid.
//!
//! ```text
//! cargo run --example ingest_validate
//! ```

use cohort_pulse::ingest::{parse_records, series_for, usage_matrix, weekly_data_share, CsvSchema, Measure};

const DATA: &str = "\
participant_id,timestamp,measure,value,session_flag
P001,2022-01-25T03:14:00Z,sleep_hr,57.0,false
P001,2022-01-24T03:10:00Z,sleep_hr,58.5,false
P001,2022-01-25T09:30:00Z,waking_hr,128.0,true
P001,2022-01-25T05:00:00Z,waking_hr,71.0,false
P002,2022-01-25T02:55:00Z,sleep_hr,61.0,false
P002,2022-01-26T02:40:00Z,sleep_hr,NaN,false
P002,2022-01-26T02:41:00Z,sleep_hrv,-4,false
P002,2022-01-25T02:55:00Z,sleep_hr,60.0,false
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let outcome = parse_records(DATA.as_bytes(), CsvSchema::MeasureRecordsV1)?;
    println!(
        "rows {} accepted {} rejected {}",
        outcome.rows_seen,
        outcome.accepted(),
        outcome.rejections.len()
    );
    for r in &outcome.rejections {
        println!("  line {}: {}", r.line, r.reason);
    }

    let rs = &outcome.records;
    let all = series_for(rs, "P001", Measure::WakingHr, true)?;
    let rest = series_for(rs, "P001", Measure::WakingHr, false)?;
    println!(
        "P001 waking_hr: {} points, {} without workout sessions",
        all.len(),
        rest.len()
    );

    let sleep = series_for(rs, "P001", Measure::SleepHr, false)?;
    for (t, v) in sleep.points() {
        println!("  {t}  {v}");
    }

    for (week, share) in weekly_data_share(rs) {
        println!(
            "week {}: {} records, max share {:.2}",
            week.get(),
            share.total,
            share.max_share
        );
    }

    let usage = usage_matrix(rs);
    for (i, d) in usage.dates.iter().enumerate() {
        let row: String = (0..usage.participants.len())
            .map(|j| if usage.get(i, j) { '#' } else { '.' })
            .collect();
        println!("{d} {row}");
    }
    Ok(())
}

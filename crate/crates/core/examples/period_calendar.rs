//! Academic period calendar: the default intervals, derived pre-exam
//! windows, precedence on overlaps, and ISO calendar-week folding.
//!
//! ```text
//! cargo run --example period_calendar
//! ```

use chrono::NaiveDate;
use cohort_pulse::calendar::{build_calendar, iso_week_fold, PeriodCalendar, PeriodConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cal = PeriodCalendar::academic_default();
    for e in cal.entries() {
        println!("{:<16} {} .. {}", e.label.as_str(), e.start, e.end);
    }

    let dates = [
        "2022-01-05",
        "2022-01-07",
        "2022-01-20",
        "2022-05-01",
        "2022-06-15",
        "2023-08-04",
        "2021-01-01",
    ];
    println!();
    for d in dates {
        let date: NaiveDate = d.parse()?;
        println!(
            "{d}  {:<16} week {}",
            cal.assign_period(date).as_str(),
            iso_week_fold(date).get()
        );
    }

    // a custom calendar, with golden week ranked above exams
    let custom = PeriodConfig::from_toml(
        r#"
        precedence = ["golden_week", "spring_exam", "summer_exam", "spring_pre_exam",
                      "summer_pre_exam", "new_year", "spring_break", "summer_break", "semester"]
        [[period]]
        label = "summer_exam"
        start = "2024-04-30"
        end = "2024-05-10"
        [[period]]
        label = "golden_week"
        start = "2024-04-29"
        end = "2024-05-05"
        "#,
    )?;
    let cal = build_calendar(&custom)?;
    println!();
    for d in ["2024-04-20", "2024-05-02", "2024-05-08"] {
        println!("{d}  {}", cal.assign_period(d.parse()?).as_str());
    }
    Ok(())
}

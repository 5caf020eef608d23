//! Calendar-week model: responses centred on the semester median, one
//! coefficient per ISO week, rendered as an SVG panel.
//!
//! ```text
//! cargo run --example calendar_week_model -- week_panel.svg
//! ```

use chrono::{Duration, NaiveDate};
use cohort_pulse::calendar::{iso_week_fold, PeriodCalendar, PeriodLabel};
use cohort_pulse::lmm::{calweek_model, Observation};
use cohort_pulse::report::{emit_week_plot, WeekPlot};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cal = PeriodCalendar::academic_default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let person = Normal::new(0.0, 0.5)?;
    let noise = Normal::new(0.0, 1.0)?;
    let start = NaiveDate::from_ymd_opt(2021, 8, 1).unwrap();

    let mut obs = Vec::new();
    let mut semester = Vec::new();
    for p in 0..25 {
        let u = person.sample(&mut rng);
        for day in 0..730 {
            let date = start + Duration::days(day);
            let week = iso_week_fold(date);
            let bump = if (29..=31).contains(&week.get()) { 1.0 } else { 0.0 };
            let y = u + bump + noise.sample(&mut rng);
            if cal.assign_period(date) == PeriodLabel::Semester {
                semester.push(y);
            }
            obs.push(Observation::new(format!("P{p:02}"), y, week));
        }
    }
    semester.sort_by(f64::total_cmp);
    let median = semester[semester.len() / 2];

    let result = calweek_model(&obs, median)?;
    for w in result.present().filter(|w| (27..=33).contains(&w.week.get())) {
        println!(
            "week {:>2}: {:6.3} (p = {:.3}) {}",
            w.week.get(),
            w.estimate,
            w.p.unwrap_or(1.0),
            w.tier.as_str()
        );
    }

    let svg = emit_week_plot(
        &WeekPlot::from_result("synthetic bump, weeks 29-31", true, &result),
        &cal,
    );
    let path = std::env::args().nth(1).unwrap_or_else(|| "week_panel.svg".into());
    std::fs::write(&path, svg)?;
    println!("wrote {path}");
    Ok(())
}

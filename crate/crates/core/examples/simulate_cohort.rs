//! Generate a synthetic cohort with a planted period effect and inspect the
//! ground truth.
//!
//! ```text
//! cargo run --release --example simulate_cohort
//! ```

use chrono::NaiveDate;
use cohort_pulse::calendar::PeriodLabel;
use cohort_pulse::ingest::{weekly_data_share, Measure};
use cohort_pulse::simulate::{generate_cohort, truth_report, PlantedEffect, SimConfig, Tranche};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        seed: 2024,
        n_participants: 20,
        tranches: vec![
            Tranche {
                date: NaiveDate::from_ymd_opt(2021, 7, 30).unwrap(),
                size: 12,
            },
            Tranche {
                date: NaiveDate::from_ymd_opt(2022, 4, 8).unwrap(),
                size: 8,
            },
        ],
        planted: vec![PlantedEffect::period(Measure::WakingHr, PeriodLabel::SummerExam, 0.42)],
        ..SimConfig::default()
    };
    println!("{}", cfg.to_toml());

    let (records, truth) = generate_cohort(&cfg)?;
    println!(
        "{} records from {} participants",
        records.len(),
        records.participants().len()
    );
    for m in Measure::ALL {
        println!(
            "  {:<22} {}",
            m.as_str(),
            records.records().iter().filter(|r| r.measure == m).count()
        );
    }

    let worst = weekly_data_share(&records)
        .values()
        .map(|s| s.max_share)
        .fold(0.0, f64::max);
    println!("largest single-participant weekly share: {worst:.3}");

    for p in truth.participants.iter().take(3) {
        let hr = &p.measures[&Measure::SleepHr];
        println!(
            "{} joined {} left {}: sleep HR mode {:.2}, MAD {:.2}, seasonal amplitude {:.2}",
            p.id, p.join, p.leave, hr.mode, hr.mad, hr.amplitude
        );
    }

    let mut csv = Vec::new();
    truth_report(&truth, &mut csv)?;
    let text = String::from_utf8(csv)?;
    for line in text
        .lines()
        .filter(|l| l.starts_with("kind") || l.starts_with("planted"))
    {
        println!("{line}");
    }
    Ok(())
}

//! Fit and remove an annual sinusoid from a nightly heart-rate series.
//!
//! ```text
//! cargo run --example detrend_sinusoid
//! ```

use chrono::{Duration, TimeZone, Utc};
use cohort_pulse::ingest::{Measure, MeasureSeries};
use cohort_pulse::preprocess::{detrend, fit_sinusoid, AmplitudeBounds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t0 = Utc.with_ymd_and_hms(2021, 8, 1, 18, 0, 0).unwrap();
    let noise = Normal::new(0.0, 1.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = 2.0 * std::f64::consts::PI / 365.0;
    let points = (0..730)
        .map(|day| {
            let v = 58.0 + 2.0 * (w * day as f64 - 1.0).sin() + noise.sample(&mut rng);
            (t0 + Duration::days(day), v)
        })
        .collect();
    let series = MeasureSeries::new("P001", Measure::SleepHr, points)?;

    let fit = fit_sinusoid(&series, AmplitudeBounds::for_measure(Measure::SleepHr))?;
    println!(
        "A = {:.3}  B = {:.3e} rad/s  C = {:.3}  D = {:.3}  (n = {})",
        fit.amplitude, fit.angular_frequency, fit.phase, fit.shift, fit.n
    );

    let flat = detrend(&series, &fit)?;
    let refit = fit_sinusoid(&flat, AmplitudeBounds::for_measure(Measure::SleepHr))?;
    println!("after detrending: A = {:.3}", refit.amplitude);

    for day in [0usize, 91, 182, 273] {
        let (t, v) = series.points()[day];
        println!(
            "{}  raw {:6.2}  detrended {:6.2}",
            t.date_naive(),
            v,
            flat.points()[day].1
        );
    }
    Ok(())
}

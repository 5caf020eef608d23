//! Skew-normal baseline, mode and MAD, and normalisation into MAD units.
//!
//! ```text
//! cargo run --example skew_normal_baseline
//! ```

use chrono::{Duration, TimeZone, Utc};
use cohort_pulse::ingest::{Measure, MeasureSeries};
use cohort_pulse::preprocess::{fit_baseline, fit_skew_normal, normalize, BaselineOptions, Dispersion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, SkewNormal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = SkewNormal::new(55.0, 6.0, 5.0)?;
    let values: Vec<f64> = (0..5000).map(|_| truth.sample(&mut rng)).collect();

    let fit = fit_skew_normal(&values).ok_or("fit failed")?;
    let d = fit.dist;
    println!(
        "xi = {:.3}  omega = {:.3}  alpha = {:.3}  ({} iterations, loglik {:.1} from {:.1})",
        d.location, d.scale, d.shape, fit.iterations, fit.log_likelihood, fit.initial_log_likelihood
    );
    println!("mode = {:.3}  mean = {:.3}", d.mode(), d.mean());

    let t0 = Utc.with_ymd_and_hms(2022, 4, 1, 0, 0, 0).unwrap();
    let series = MeasureSeries::new(
        "P001",
        Measure::SleepHr,
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (t0 + Duration::minutes(10 * i as i64), v))
            .collect(),
    )?;
    for dispersion in [Dispersion::MeanAbsolute, Dispersion::MedianAbsolute] {
        let opts = BaselineOptions {
            dispersion,
            ..BaselineOptions::default()
        };
        let b = fit_baseline(&series, &opts)?;
        println!("{dispersion:?}: m0 = {:.3}  mad = {:.3}", b.mode, b.mad);
    }

    let b = fit_baseline(&series, &BaselineOptions::default())?;
    let z = normalize(&series, &b)?;
    let first: Vec<String> = z.values().take(5).map(|v| format!("{v:.2}")).collect();
    println!("normalized: {}", first.join(" "));
    println!("normalizing twice: {}", normalize(&z, &b).unwrap_err());
    Ok(())
}

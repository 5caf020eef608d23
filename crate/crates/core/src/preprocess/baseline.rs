//! Per-participant baseline (skew-normal mode) and dispersion, and the
//! normalisation `x' = (x − m0) / MAD`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::skewnormal::{fit_skew_normal, SkewNormal};
use crate::error::PreprocessError;
use crate::ingest::{Measure, MeasureSeries, SeriesUnit};

/// How the dispersion around the baseline is summarised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    /// mean |x − m0|
    #[default]
    MeanAbsolute,
    /// median |x − m0|
    MedianAbsolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub min_observations: usize,
    pub dispersion: Dispersion,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            min_observations: 100,
            dispersion: Dispersion::MeanAbsolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub participant_id: Arc<str>,
    pub measure: Measure,
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
    pub mode: f64,
    pub mad: f64,
    pub n: usize,
    pub log_likelihood: f64,
    /// Log-likelihood at the method-of-moments starting point.
    pub initial_log_likelihood: f64,
    pub converged: bool,
}

impl BaselineModel {
    pub fn distribution(&self) -> SkewNormal {
        SkewNormal::new(self.xi, self.omega, self.alpha)
    }
}

pub fn dispersion(values: &[f64], center: f64, kind: Dispersion) -> f64 {
    match kind {
        Dispersion::MeanAbsolute => values.iter().map(|x| (x - center).abs()).sum::<f64>() / values.len() as f64,
        Dispersion::MedianAbsolute => {
            let mut dev: Vec<f64> = values.iter().map(|x| (x - center).abs()).collect();
            median_in_place(&mut dev)
        }
    }
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn fit_baseline(s: &MeasureSeries, opts: &BaselineOptions) -> Result<BaselineModel, PreprocessError> {
    if s.len() < opts.min_observations {
        return Err(PreprocessError::BaselineDataInsufficient {
            got: s.len(),
            min: opts.min_observations,
        });
    }
    let values: Vec<f64> = s.values().collect();
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(PreprocessError::DegenerateDispersion);
    }
    let fit = fit_skew_normal(&values).ok_or(PreprocessError::DegenerateDispersion)?;
    let mode = fit.dist.mode();
    let mad = dispersion(&values, mode, opts.dispersion);
    if !(mad > 0.0) {
        return Err(PreprocessError::DegenerateDispersion);
    }
    Ok(BaselineModel {
        participant_id: s.participant_id.clone(),
        measure: s.measure,
        xi: fit.dist.location,
        omega: fit.dist.scale,
        alpha: fit.dist.shape,
        mode,
        mad,
        n: values.len(),
        log_likelihood: fit.log_likelihood,
        initial_log_likelihood: fit.initial_log_likelihood,
        converged: fit.converged,
    })
}

fn check_pair(s: &MeasureSeries, b: &BaselineModel) -> Result<(), PreprocessError> {
    if s.participant_id != b.participant_id || s.measure != b.measure {
        return Err(PreprocessError::Mismatch {
            fit_participant: b.participant_id.to_string(),
            fit_measure: b.measure,
            participant: s.participant_id.to_string(),
            measure: s.measure,
        });
    }
    if !(b.mad > 0.0) {
        return Err(PreprocessError::DegenerateDispersion);
    }
    Ok(())
}

pub fn normalize(s: &MeasureSeries, b: &BaselineModel) -> Result<MeasureSeries, PreprocessError> {
    if s.unit == SeriesUnit::Mad {
        return Err(PreprocessError::AlreadyNormalized);
    }
    check_pair(s, b)?;
    Ok(s.map_values(SeriesUnit::Mad, |_, x| (x - b.mode) / b.mad))
}

/// Inverse of [`normalize`].
pub fn denormalize(s: &MeasureSeries, b: &BaselineModel) -> Result<MeasureSeries, PreprocessError> {
    check_pair(s, b)?;
    Ok(s.map_values(SeriesUnit::Native, |_, x| x * b.mad + b.mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone, Utc};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, SkewNormal as SkewNormalSampler};

    fn series_from(values: &[f64]) -> MeasureSeries {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let pts = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (t0 + Duration::minutes(i as i64), v))
            .collect();
        MeasureSeries::new("P", Measure::SleepHr, pts).unwrap()
    }

    fn draws(xi: f64, omega: f64, alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let d = SkewNormalSampler::new(xi, omega, alpha).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn model(mode: f64, mad: f64) -> BaselineModel {
        BaselineModel {
            participant_id: "P".into(),
            measure: Measure::SleepHr,
            xi: mode,
            omega: 1.0,
            alpha: 0.0,
            mode,
            mad,
            n: 100,
            log_likelihood: 0.0,
            initial_log_likelihood: 0.0,
            converged: true,
        }
    }

    #[test]
    fn symmetric_location() {
        let s = series_from(&draws(55.0, 6.0, 0.0, 5000, 11));
        let b = fit_baseline(&s, &BaselineOptions::default()).unwrap();
        assert!((b.mode - 55.0).abs() < 0.5, "{b:?}");
        assert!(b.log_likelihood >= b.initial_log_likelihood);
    }

    #[test]
    fn too_few_observations() {
        let s = series_from(&draws(55.0, 6.0, 0.0, 50, 1));
        assert!(matches!(
            fit_baseline(&s, &BaselineOptions::default()),
            Err(PreprocessError::BaselineDataInsufficient { got: 50, min: 100 })
        ));
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let s = series_from(&[60.0; 150]);
        assert!(matches!(
            fit_baseline(&s, &BaselineOptions::default()),
            Err(PreprocessError::DegenerateDispersion)
        ));
    }

    #[test]
    fn dispersion_variants() {
        let v = [1.0, 2.0, 4.0, 9.0];
        assert_eq!(
            dispersion(&v, 2.0, Dispersion::MeanAbsolute),
            (1.0 + 0.0 + 2.0 + 7.0) / 4.0
        );
        assert_eq!(dispersion(&v, 2.0, Dispersion::MedianAbsolute), 1.5);
    }

    #[test]
    fn normalize_examples() {
        let b = model(60.0, 4.0);
        let s = series_from(&[60.0, 64.0, 52.0]);
        let n = normalize(&s, &b).unwrap();
        let v: Vec<f64> = n.values().collect();
        assert_eq!(v, vec![0.0, 1.0, -2.0]);
        assert_eq!(n.unit, SeriesUnit::Mad);
        assert!(matches!(normalize(&n, &b), Err(PreprocessError::AlreadyNormalized)));
        assert!(matches!(
            normalize(&s, &model(60.0, 0.0)),
            Err(PreprocessError::DegenerateDispersion)
        ));
    }

    #[test]
    fn normalize_inverts() {
        let b = model(57.3, 3.7);
        let s = series_from(&draws(55.0, 6.0, 3.0, 200, 3));
        let back = normalize(&denormalize(&normalize(&s, &b).unwrap(), &b).unwrap(), &b).unwrap();
        let once = normalize(&s, &b).unwrap();
        for (a, c) in back.values().zip(once.values()) {
            assert!((a - c).abs() < 1e-12);
        }
    }
}

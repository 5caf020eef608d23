//! Annual sinusoid `y = A·sin(B·t + C) + D` and detrending.
//!
//! `B` is fixed to one cycle per 365 days and `t` counts seconds from the
//! first point of the series. For a fixed phase the model is linear in
//! `(A, D)`, so the box-constrained least-squares problem in those two is
//! solved exactly and only the phase is searched numerically.

use std::f64::consts::PI;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::PreprocessError;
use crate::ingest::{Measure, MeasureSeries};
use crate::optim::brent_minimize;

pub const SECONDS_PER_YEAR: f64 = 365.0 * 86_400.0;
pub const ANNUAL_ANGULAR_FREQUENCY: f64 = 2.0 * PI / SECONDS_PER_YEAR;

pub const MIN_SPAN_DAYS: f64 = 180.0;
pub const MIN_POINTS: usize = 60;
const PHASE_STARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeBounds {
    pub lo: f64,
    pub hi: f64,
}

impl AmplitudeBounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// [0, 5] beats/min for heart rate, [0, 20] ms for HRV.
    pub fn for_measure(m: Measure) -> Self {
        match m {
            Measure::WakingHr | Measure::SleepHr => Self::new(0.0, 5.0),
            Measure::SleepHrv => Self::new(0.0, 20.0),
            _ => Self::new(0.0, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidFit {
    pub participant_id: Arc<str>,
    pub measure: Measure,
    pub amplitude: f64,
    pub angular_frequency: f64,
    pub phase: f64,
    pub shift: f64,
    pub t0: DateTime<Utc>,
    /// Residual RMS.
    pub goodness: f64,
    pub n: usize,
}

impl SinusoidFit {
    pub fn seconds_since_t0(&self, ts: DateTime<Utc>) -> f64 {
        (ts - self.t0).num_seconds() as f64
    }

    /// Model value `A·sin(B·t + C) + D` at an instant.
    pub fn value_at(&self, ts: DateTime<Utc>) -> f64 {
        self.seasonal_at(ts) + self.shift
    }

    fn seasonal_at(&self, ts: DateTime<Utc>) -> f64 {
        self.amplitude * (self.angular_frequency * self.seconds_since_t0(ts) + self.phase).sin()
    }
}

/// Sums needed to evaluate the profiled residual sum of squares for any
/// phase in O(1). Values are centred on their mean.
struct Moments {
    n: f64,
    s: f64,
    c: f64,
    ss: f64,
    cc: f64,
    sc: f64,
    ys: f64,
    yc: f64,
    yy: f64,
}

impl Moments {
    fn new(t: &[f64], y: &[f64]) -> Self {
        let mut m = Moments {
            n: t.len() as f64,
            s: 0.0,
            c: 0.0,
            ss: 0.0,
            cc: 0.0,
            sc: 0.0,
            ys: 0.0,
            yc: 0.0,
            yy: 0.0,
        };
        for (&ti, &yi) in t.iter().zip(y) {
            let (sn, cs) = (ANNUAL_ANGULAR_FREQUENCY * ti).sin_cos();
            m.s += sn;
            m.c += cs;
            m.ss += sn * sn;
            m.cc += cs * cs;
            m.sc += sn * cs;
            m.ys += yi * sn;
            m.yc += yi * cs;
            m.yy += yi * yi;
        }
        m
    }

    /// sin(Bt + C) = sin(Bt) cos C + cos(Bt) sin C
    fn at_phase(&self, phase: f64) -> (f64, f64, f64) {
        let (sp, cp) = phase.sin_cos();
        let sum = self.s * cp + self.c * sp;
        let sum_sq = self.ss * cp * cp + 2.0 * self.sc * cp * sp + self.cc * sp * sp;
        let sum_y = self.ys * cp + self.yc * sp;
        (sum, sum_sq, sum_y)
    }

    fn ssr(&self, a: f64, d: f64, sum: f64, sum_sq: f64, sum_y: f64) -> f64 {
        // Σ(y − a·s − d)² with Σy = 0
        self.yy - 2.0 * a * sum_y + a * a * sum_sq + 2.0 * a * d * sum + self.n * d * d
    }

    /// Exact minimiser of the convex quadratic over the (A, D) box.
    fn best_amplitude_shift(&self, phase: f64, a_box: (f64, f64), d_box: (f64, f64)) -> (f64, f64, f64) {
        let (sum, sum_sq, sum_y) = self.at_phase(phase);
        let clip = |v: f64, b: (f64, f64)| v.clamp(b.0, b.1);
        let mut cands: Vec<(f64, f64)> = Vec::with_capacity(5);
        let det = sum_sq * self.n - sum * sum;
        if det > 1e-12 * sum_sq * self.n {
            let a = (sum_y * self.n) / det;
            let d = (-sum * sum_y) / det;
            cands.push((a, d));
        }
        for a in [a_box.0, a_box.1] {
            if a.is_finite() {
                cands.push((a, clip(-a * sum / self.n, d_box)));
            }
        }
        for d in [d_box.0, d_box.1] {
            let a = if sum_sq > 0.0 { (sum_y - d * sum) / sum_sq } else { 0.0 };
            cands.push((clip(a, a_box), d));
        }
        cands
            .into_iter()
            .filter(|&(a, d)| a >= a_box.0 && a <= a_box.1 && d >= d_box.0 && d <= d_box.1)
            .map(|(a, d)| (self.ssr(a, d, sum, sum_sq, sum_y), a, d))
            .fold((f64::INFINITY, 0.0, 0.0), |best, c| if c.0 < best.0 { c } else { best })
    }
}

/// Least-squares (Gaussian maximum-likelihood) fit of the annual sinusoid.
pub fn fit_sinusoid(s: &MeasureSeries, bounds: AmplitudeBounds) -> Result<SinusoidFit, PreprocessError> {
    let t0 = s.first_time();
    let span_days = (s.last_time() - t0).num_seconds() as f64 / 86_400.0;
    if s.len() < MIN_POINTS || span_days < MIN_SPAN_DAYS {
        return Err(PreprocessError::FitDataInsufficient {
            points: s.len(),
            span_days,
            min_points: MIN_POINTS,
            min_span_days: MIN_SPAN_DAYS,
        });
    }
    let t: Vec<f64> = s.points().iter().map(|p| (p.0 - t0).num_seconds() as f64).collect();
    let mean = s.values().sum::<f64>() / s.len() as f64;
    let y: Vec<f64> = s.values().map(|v| v - mean).collect();
    let m = Moments::new(&t, &y);

    // D in [0.5·D_init, 1.5·D_init], D_init = mean; expressed relative to the mean.
    let (d_lo, d_hi) = {
        let (a, b) = (0.5 * mean, 1.5 * mean);
        (a.min(b) - mean, a.max(b) - mean)
    };
    let a_box = (bounds.lo, bounds.hi);
    let d_box = (d_lo, d_hi);
    let profile = |c: f64| m.best_amplitude_shift(c, a_box, d_box).0;

    let width = 2.0 * PI / PHASE_STARTS as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut any_converged = false;
    for k in 0..PHASE_STARTS {
        let lo = -PI + width * k as f64;
        let r = brent_minimize(profile, lo, lo + width, 1e-12, 1e-12, 200);
        any_converged |= r.converged;
        if r.fx.is_finite() && best.is_none_or(|b| r.fx < b.1) {
            best = Some((r.x, r.fx));
        }
    }
    let Some((phase, ssr)) = best else {
        return Err(PreprocessError::FitDiverged(
            "residual sum of squares not finite".into(),
        ));
    };
    if !any_converged {
        return Err(PreprocessError::FitDiverged(format!(
            "no phase start converged (best phase {phase:.4}, ssr {ssr:.4})"
        )));
    }
    let (ssr, amplitude, d) = m.best_amplitude_shift(phase, a_box, d_box);
    Ok(SinusoidFit {
        participant_id: s.participant_id.clone(),
        measure: s.measure,
        amplitude,
        angular_frequency: ANNUAL_ANGULAR_FREQUENCY,
        phase,
        shift: mean + d,
        t0,
        goodness: (ssr.max(0.0) / m.n).sqrt(),
        n: s.len(),
    })
}

/// Removes the fitted seasonal swing: `x − (A·sin(Bt + C) + D) + D`.
pub fn detrend(s: &MeasureSeries, fit: &SinusoidFit) -> Result<MeasureSeries, PreprocessError> {
    if s.participant_id != fit.participant_id || s.measure != fit.measure {
        return Err(PreprocessError::Mismatch {
            fit_participant: fit.participant_id.to_string(),
            fit_measure: fit.measure,
            participant: s.participant_id.to_string(),
            measure: s.measure,
        });
    }
    if fit.amplitude == 0.0 {
        return Ok(s.clone());
    }
    Ok(s.map_values(s.unit, |t, x| x - fit.seasonal_at(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn series(days: usize, f: impl Fn(f64) -> f64) -> MeasureSeries {
        let t0 = Utc.with_ymd_and_hms(2021, 8, 1, 18, 0, 0).unwrap();
        let pts = (0..days)
            .map(|i| {
                let ts = t0 + Duration::days(i as i64);
                (ts, f((ts - t0).num_seconds() as f64))
            })
            .collect();
        MeasureSeries::new("P", Measure::SleepHr, pts).unwrap()
    }

    #[test]
    fn constant_series_has_no_amplitude() {
        let s = series(400, |_| 60.0);
        let f = fit_sinusoid(&s, AmplitudeBounds::for_measure(Measure::SleepHr)).unwrap();
        assert!(f.amplitude <= 1e-3);
        assert!((f.shift - 60.0).abs() <= 1e-3);
    }

    #[test]
    fn noiseless_recovery() {
        let s = series(730, |t| 58.0 + 2.0 * (ANNUAL_ANGULAR_FREQUENCY * t - 1.0).sin());
        let f = fit_sinusoid(&s, AmplitudeBounds::for_measure(Measure::SleepHr)).unwrap();
        assert!((f.amplitude - 2.0).abs() < 0.02, "{f:?}");
        assert!((f.phase + 1.0).abs() < 0.02);
        assert!((f.shift - 58.0).abs() < 0.02);
        assert_eq!(f.angular_frequency, 2.0 * PI / (365.0 * 86_400.0));
        let flat = detrend(&s, &f).unwrap();
        let refit = fit_sinusoid(&flat, AmplitudeBounds::for_measure(Measure::SleepHr)).unwrap();
        assert!(refit.amplitude <= 0.05);
    }

    #[test]
    fn amplitude_bound_binds() {
        let s = series(730, |t| 58.0 + 8.0 * (ANNUAL_ANGULAR_FREQUENCY * t + 0.5).sin());
        let f = fit_sinusoid(&s, AmplitudeBounds::for_measure(Measure::SleepHr)).unwrap();
        assert_eq!(f.amplitude, 5.0);
        assert!((f.phase - 0.5).abs() < 0.05);
    }

    #[test]
    fn short_series_refused() {
        let s = series(100, |_| 60.0);
        assert!(matches!(
            fit_sinusoid(&s, AmplitudeBounds::new(0.0, 5.0)),
            Err(PreprocessError::FitDataInsufficient { .. })
        ));
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let s = series(300, |t| 50.0 + (t / 1e5).sin());
        let fit = SinusoidFit {
            participant_id: "P".into(),
            measure: Measure::SleepHr,
            amplitude: 0.0,
            angular_frequency: ANNUAL_ANGULAR_FREQUENCY,
            phase: 0.3,
            shift: 50.0,
            t0: s.first_time(),
            goodness: 0.0,
            n: 300,
        };
        assert_eq!(detrend(&s, &fit).unwrap(), s);
    }

    #[test]
    fn zero_crossing_point_unchanged() {
        // phase 0 and t = 0 gives B·t + C = 0
        let s = series(300, |_| 61.5);
        let fit = SinusoidFit {
            participant_id: "P".into(),
            measure: Measure::SleepHr,
            amplitude: 3.0,
            angular_frequency: ANNUAL_ANGULAR_FREQUENCY,
            phase: 0.0,
            shift: 60.0,
            t0: s.first_time(),
            goodness: 0.0,
            n: 300,
        };
        let out = detrend(&s, &fit).unwrap();
        assert_eq!(out.points()[0].1, 61.5);
    }

    #[test]
    fn mismatched_fit_is_rejected() {
        let s = series(300, |_| 60.0);
        let mut fit = fit_sinusoid(&s, AmplitudeBounds::new(0.0, 5.0)).unwrap();
        fit.measure = Measure::SleepHrv;
        assert!(matches!(detrend(&s, &fit), Err(PreprocessError::Mismatch { .. })));
    }
}

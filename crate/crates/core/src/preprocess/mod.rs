//! Per-participant signal preparation.
//!
//! The steps always compose in the same order: session exclusion (done by
//! [`crate::ingest::series_for`]), seasonal detrending, baseline fit,
//! normalisation, and optionally daily-maximum aggregation.

mod baseline;
mod daily;
mod sinusoid;
pub mod skewnormal;

use std::io::Write;

pub use baseline::{denormalize, dispersion, fit_baseline, normalize, BaselineModel, BaselineOptions, Dispersion};
pub use daily::{daily_max, DailySeries};
pub use sinusoid::{
    detrend, fit_sinusoid, AmplitudeBounds, SinusoidFit, ANNUAL_ANGULAR_FREQUENCY, MIN_POINTS, MIN_SPAN_DAYS,
    SECONDS_PER_YEAR,
};
pub use skewnormal::{fit_skew_normal, SkewNormal, SkewNormalFit};

use crate::error::PreprocessError;
use crate::ingest::MeasureSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareOptions {
    pub detrend: bool,
    pub amplitude: AmplitudeBounds,
    pub baseline: BaselineOptions,
}

/// Output of detrend → baseline → normalise for one participant/measure.
#[derive(Debug, Clone)]
pub struct PreparedSeries {
    /// Native units, seasonal swing removed when detrending is on.
    pub raw: MeasureSeries,
    pub normalized: MeasureSeries,
    pub sinusoid: Option<SinusoidFit>,
    pub baseline: BaselineModel,
}

pub fn prepare_series(s: &MeasureSeries, opts: &PrepareOptions) -> Result<PreparedSeries, PreprocessError> {
    let (raw, sinusoid) = if opts.detrend {
        let fit = fit_sinusoid(s, opts.amplitude)?;
        (detrend(s, &fit)?, Some(fit))
    } else {
        (s.clone(), None)
    };
    let baseline = fit_baseline(&raw, &opts.baseline)?;
    let normalized = normalize(&raw, &baseline)?;
    Ok(PreparedSeries {
        raw,
        normalized,
        sinusoid,
        baseline,
    })
}

pub const FIT_DUMP_HEADER: [&str; 12] = [
    "participant",
    "measure",
    "A",
    "B",
    "C",
    "D",
    "xi",
    "omega",
    "alpha",
    "m0",
    "mad",
    "n",
];

/// Audit dump, one row per prepared series. Sinusoid columns are empty when
/// the measure was not detrended.
pub fn write_fit_dump<'a>(
    rows: impl IntoIterator<Item = (&'a Option<SinusoidFit>, &'a BaselineModel)>,
    out: impl Write,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIT_DUMP_HEADER)?;
    for (sin, b) in rows {
        let sin_cols = match sin {
            Some(f) => [
                f.amplitude.to_string(),
                f.angular_frequency.to_string(),
                f.phase.to_string(),
                f.shift.to_string(),
            ],
            None => Default::default(),
        };
        let mut rec = vec![b.participant_id.to_string(), b.measure.to_string()];
        rec.extend(sin_cols);
        rec.extend([
            b.xi.to_string(),
            b.omega.to_string(),
            b.alpha.to_string(),
            b.mode.to_string(),
            b.mad.to_string(),
            b.n.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

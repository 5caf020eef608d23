use thiserror::Error;

use crate::ingest::Measure;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is not valid UTF-8: {0}")]
    Encoding(String),
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("no records for participant `{participant}` and measure `{measure}`")]
    EmptySeries { participant: String, measure: Measure },
    #[error("series is not strictly increasing at index {index}")]
    Unsorted { index: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum CalendarError {
    #[error("period `{label}` has start {start} after end {end}")]
    InvertedInterval {
        label: String,
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
    },
    #[error("unknown period label `{0}`")]
    UnknownLabel(String),
    #[error("precedence list must name every label exactly once: {0}")]
    Precedence(String),
    #[error("invalid period config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error(
        "sinusoid fit needs >= {min_points} points over >= {min_span_days} days, got {points} over {span_days:.1}"
    )]
    FitDataInsufficient {
        points: usize,
        span_days: f64,
        min_points: usize,
        min_span_days: f64,
    },
    #[error("sinusoid fit diverged: {0}")]
    FitDiverged(String),
    #[error("baseline fit needs >= {min} observations, got {got}")]
    BaselineDataInsufficient { got: usize, min: usize },
    #[error("dispersion around the baseline is zero")]
    DegenerateDispersion,
    #[error("series is already normalized")]
    AlreadyNormalized,
    #[error("fit belongs to {fit_participant}/{fit_measure}, series is {participant}/{measure}")]
    Mismatch {
        fit_participant: String,
        fit_measure: Measure,
        participant: String,
        measure: Measure,
    },
}

#[derive(Debug, Error)]
pub enum LmmError {
    #[error("cannot encode design: {0}")]
    Encode(String),
    #[error("fixed-effects matrix is rank deficient (column `{column}`)")]
    RankDeficient { column: String },
    #[error("need N > p + 1 and >= 2 groups (N = {n_obs}, p = {p}, groups = {n_groups})")]
    TooFewObservations { n_obs: usize, p: usize, n_groups: usize },
    #[error("REML optimisation failed: {reason} (log-ratio bracket [{lo:.3}, {hi:.3}])")]
    OptimFailed { reason: String, lo: f64, hi: f64 },
    #[error("total variance is zero, R² undefined")]
    ZeroVariance,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
}

/// Top-level error; the variant names the module that failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("calendar: {0}")]
    Calendar(#[from] CalendarError),
    #[error("preprocess: {0}")]
    Preprocess(#[from] PreprocessError),
    #[error("lmm: {0}")]
    Lmm(#[from] LmmError),
    #[error("simulate: {0}")]
    Sim(#[from] SimError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Ingest(_) => "ingest",
            Error::Calendar(_) => "calendar",
            Error::Preprocess(_) => "preprocess",
            Error::Lmm(_) => "lmm",
            Error::Sim(_) => "simulate",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Context { source, .. } => source.module(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Cohort-level stress biomarkers from wearable heart-rate data.
//!
//! The crate turns per-participant wearable measurements (sleep HR, sleep
//! HRV, waking HR and a few sleep/activity summaries) into cohort-level
//! mixed-effects estimates of how the academic calendar moves them:
//!
//! - [`ingest`]: CSV records, per-participant series, data-balance and
//!   usage diagnostics
//! - [`calendar`]: academic periods with precedence, ISO calendar-week folding
//! - [`preprocess`]: annual sinusoid detrending, skew-normal baseline and
//!   dispersion, normalisation, daily maxima
//! - [`lmm`]: random-intercept linear mixed models fit by REML, Wald tests,
//!   Bonferroni flags, marginal/conditional R²
//! - [`simulate`]: synthetic cohorts with known ground truth
//! - [`report`]: the end-to-end pipeline, coefficient tables and SVG plots
//!
//! Runnable walkthroughs of each capability live in the crate's
//! `examples/` directory (`cargo run --example <name>`).

pub mod calendar;
pub mod error;
pub mod ingest;
pub mod lmm;
mod optim;
pub mod preprocess;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};
pub use optim::{brent_minimize, Minimum};

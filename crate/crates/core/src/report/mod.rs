//! End-to-end runs: configuration, the analysis pipeline, tables and plots.

mod config;
mod pipeline;
mod svg;

pub use config::{default_models, Analyses, ModelSpec, RunConfig};
pub use pipeline::{
    analyze, compute, fit_calweek, fit_period_model, load_data, period_observations, period_tables_text, prepare_model,
    render_artifacts, run, threads_from_env, week_observations, Analysis, AnalysisSettings, Artifacts,
    CalweekModelResult, DatedResponse, LoadedData, PeriodModelResult, PreparedModel, PreparedParticipant, RunOutput,
    Skipped, Variant, THREADS_ENV,
};
pub use svg::{emit_week_plot, WeekPlot};

use serde::Serialize;

use crate::error::Error;

/// Machine-readable failure report.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub module: &'static str,
    pub message: String,
    /// Outermost context first.
    pub context: Vec<String>,
}

impl ErrorReport {
    pub fn from_error(e: &Error) -> Self {
        let mut context = Vec::new();
        let mut cur = e;
        while let Error::Context { context: c, source } = cur {
            context.push(c.clone());
            cur = source;
        }
        Self {
            status: "error",
            module: e.module(),
            message: cur.to_string(),
            context,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error report serialises")
    }
}

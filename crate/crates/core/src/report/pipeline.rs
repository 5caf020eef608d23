use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{FixedOffset, NaiveDate};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Analyses, ModelSpec, RunConfig};
use super::svg::{emit_week_plot, WeekPlot};
use crate::calendar::{iso_week_fold, PeriodCalendar, PeriodLabel, WeekIndex};
use crate::error::{Error, PreprocessError, Result};
use crate::ingest::{
    parse_records, series_for, usage_matrix, weekly_data_share, write_rejections, CsvSchema, Measure, RecordSet,
    Rejection,
};
use crate::lmm::{
    bonferroni_flags, calweek_model, encode_design, fit_reml, r2_footer, wald_inference, CalweekResult, CoefRow,
    LmmFit, Observation, Reference, SignificanceMode,
};
use crate::preprocess::{
    daily_max, prepare_series, write_fit_dump, AmplitudeBounds, BaselineModel, BaselineOptions, PrepareOptions,
    SinusoidFit,
};
use crate::simulate::{generate_cohort_with_calendar, truth_report, GroundTruth};

/// Env var capping the worker count.
pub const THREADS_ENV: &str = "COHORT_PULSE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Raw,
    Normalized,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::Normalized => "normalized",
        }
    }
}

/// A date-stamped response, before it is attached to a factor level.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedResponse {
    pub participant_id: Arc<str>,
    pub date: NaiveDate,
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone)]
pub struct PreparedParticipant {
    pub sinusoid: Option<SinusoidFit>,
    pub baseline: BaselineModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub model: String,
    pub participant: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PreparedModel {
    pub spec: ModelSpec,
    pub participants: Vec<PreparedParticipant>,
    pub responses: Vec<DatedResponse>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone)]
pub struct PeriodModelResult {
    pub model: String,
    pub measure: Measure,
    pub variant: Variant,
    pub fit: LmmFit,
    pub rows: Vec<CoefRow>,
    pub significant: Vec<bool>,
    pub observations: Vec<Observation<PeriodLabel>>,
}

impl PeriodModelResult {
    pub fn row(&self, term: &str) -> Option<(&CoefRow, bool)> {
        let i = self.rows.iter().position(|r| r.term == term)?;
        Some((&self.rows[i], self.significant[i]))
    }
}

#[derive(Debug, Clone)]
pub struct CalweekModelResult {
    pub model: String,
    pub measure: Measure,
    pub variant: Variant,
    pub result: CalweekResult,
    pub observations: Vec<Observation<WeekIndex>>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub prepared: Vec<PreparedModel>,
    pub period: Vec<PeriodModelResult>,
    pub calweek: Vec<CalweekModelResult>,
    pub significance: SignificanceMode,
}

impl Analysis {
    pub fn period_model(&self, model: &str, variant: Variant) -> Option<&PeriodModelResult> {
        self.period.iter().find(|p| p.model == model && p.variant == variant)
    }

    pub fn calweek_model(&self, model: &str) -> Option<&CalweekModelResult> {
        self.calweek.iter().find(|c| c.model == model)
    }
}

/// Settings shared by every model of one analysis.
#[derive(Debug, Clone)]
pub struct AnalysisSettings {
    pub models: Vec<ModelSpec>,
    pub analyses: Analyses,
    pub significance: SignificanceMode,
    pub baseline: BaselineOptions,
}

impl AnalysisSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            models: cfg.models.clone(),
            analyses: cfg.analyses,
            significance: cfg.significance,
            baseline: cfg.baseline,
        }
    }
}

fn insufficient(e: &PreprocessError) -> bool {
    matches!(
        e,
        PreprocessError::FitDataInsufficient { .. }
            | PreprocessError::BaselineDataInsufficient { .. }
            | PreprocessError::DegenerateDispersion
    )
}

/// Session exclusion, optional detrending, baseline fit and normalisation
/// for every participant with data for the model's measure. Participants
/// without enough data are skipped and listed; other failures propagate.
pub fn prepare_model(rs: &RecordSet, spec: &ModelSpec, baseline: &BaselineOptions) -> Result<PreparedModel> {
    let offset = rs.utc_offset();
    let opts = PrepareOptions {
        detrend: spec.detrend,
        amplitude: AmplitudeBounds::for_measure(spec.measure),
        baseline: *baseline,
    };
    let participants: Vec<Arc<str>> = rs
        .participants()
        .into_iter()
        .filter(|p| rs.records_for(p, spec.measure).next().is_some())
        .collect();
    type One = std::result::Result<(PreparedParticipant, Vec<DatedResponse>), Skipped>;
    let per: Vec<Result<One>> = participants
        .par_iter()
        .map(|p| {
            let ctx = || format!("model `{}`, participant {}", spec.name, p);
            let skip = |reason: String| Skipped {
                model: spec.name.clone(),
                participant: p.to_string(),
                reason,
            };
            let series = match series_for(rs, p, spec.measure, false) {
                Ok(s) => s,
                Err(e) => return Ok(Err(skip(e.to_string()))),
            };
            let prepared = match prepare_series(&series, &opts) {
                Ok(x) => x,
                Err(e) if insufficient(&e) => return Ok(Err(skip(e.to_string()))),
                Err(e) => return Err(Error::from(e).context(ctx())),
            };
            let responses = dated_responses(&prepared.raw, &prepared.normalized, spec.daily_max, offset);
            Ok(Ok((
                PreparedParticipant {
                    sinusoid: prepared.sinusoid,
                    baseline: prepared.baseline,
                },
                responses,
            )))
        })
        .collect();
    let mut out = PreparedModel {
        spec: spec.clone(),
        participants: Vec::new(),
        responses: Vec::new(),
        skipped: Vec::new(),
    };
    for r in per {
        match r? {
            Ok((p, resp)) => {
                out.participants.push(p);
                out.responses.extend(resp);
            }
            Err(s) => out.skipped.push(s),
        }
    }
    Ok(out)
}

fn dated_responses(
    raw: &crate::ingest::MeasureSeries,
    normalized: &crate::ingest::MeasureSeries,
    aggregate: bool,
    offset: FixedOffset,
) -> Vec<DatedResponse> {
    let pid = raw.participant_id.clone();
    if aggregate {
        let r = daily_max(raw, offset);
        let n = daily_max(normalized, offset);
        r.points
            .iter()
            .zip(&n.points)
            .map(|(&(date, raw), &(_, normalized))| DatedResponse {
                participant_id: pid.clone(),
                date,
                raw,
                normalized,
            })
            .collect()
    } else {
        raw.points()
            .iter()
            .zip(normalized.points())
            .map(|(&(t, raw), &(_, normalized))| DatedResponse {
                participant_id: pid.clone(),
                date: t.with_timezone(&offset).date_naive(),
                raw,
                normalized,
            })
            .collect()
    }
}

fn pick(r: &DatedResponse, v: Variant) -> f64 {
    match v {
        Variant::Raw => r.raw,
        Variant::Normalized => r.normalized,
    }
}

pub fn period_observations(
    responses: &[DatedResponse],
    cal: &PeriodCalendar,
    variant: Variant,
) -> Vec<Observation<PeriodLabel>> {
    responses
        .iter()
        .map(|r| Observation {
            participant_id: r.participant_id.clone(),
            response: pick(r, variant),
            level: cal.assign_period(r.date),
        })
        .collect()
}

pub fn week_observations(responses: &[DatedResponse], variant: Variant) -> Vec<Observation<WeekIndex>> {
    responses
        .iter()
        .map(|r| Observation {
            participant_id: r.participant_id.clone(),
            response: pick(r, variant),
            level: iso_week_fold(r.date),
        })
        .collect()
}

/// Period model with `Semester` as the reference intercept.
pub fn fit_period_model(
    obs: Vec<Observation<PeriodLabel>>,
    spec: &ModelSpec,
    variant: Variant,
    mode: SignificanceMode,
) -> Result<PeriodModelResult> {
    let design = encode_design(&obs, &Reference::Level(PeriodLabel::Semester), Some(&PeriodLabel::ALL))?;
    let fit = fit_reml(&design)?;
    let rows = wald_inference(&fit);
    let mut significant = bonferroni_flags(&fit.p_values, fit.bonferroni_m.max(1), mode);
    if fit.has_intercept {
        // the reference intercept is not one of the compared periods
        significant[0] = false;
    }
    Ok(PeriodModelResult {
        model: spec.name.clone(),
        measure: spec.measure,
        variant,
        fit,
        rows,
        significant,
        observations: obs,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn fit_calweek(responses: &[DatedResponse], cal: &PeriodCalendar, spec: &ModelSpec) -> Result<CalweekModelResult> {
    let variant = if spec.normalize {
        Variant::Normalized
    } else {
        Variant::Raw
    };
    let semester: Vec<f64> = responses
        .iter()
        .filter(|r| cal.assign_period(r.date) == PeriodLabel::Semester)
        .map(|r| pick(r, variant))
        .collect();
    let semester_median = median(semester);
    let obs = week_observations(responses, variant);
    let result = calweek_model(&obs, semester_median)?;
    Ok(CalweekModelResult {
        model: spec.name.clone(),
        measure: spec.measure,
        variant,
        result,
        observations: obs,
    })
}

enum Job<'a> {
    Period(&'a PreparedModel, Variant),
    Calweek(&'a PreparedModel),
}

enum JobResult {
    Period(Box<PeriodModelResult>),
    Calweek(Box<CalweekModelResult>),
}

/// Prepares every model and fits the selected analyses. Fits run in
/// parallel; results come back in configuration order.
pub fn analyze(rs: &RecordSet, cal: &PeriodCalendar, settings: &AnalysisSettings) -> Result<Analysis> {
    let prepared: Vec<PreparedModel> = settings
        .models
        .par_iter()
        .map(|spec| prepare_model(rs, spec, &settings.baseline))
        .collect::<Result<_>>()?;
    for p in &prepared {
        if p.responses.is_empty() {
            return Err(Error::Config(format!(
                "model `{}`: no participant has enough `{}` data",
                p.spec.name, p.spec.measure
            )));
        }
    }
    let mut jobs = Vec::new();
    for p in &prepared {
        if settings.analyses.periods {
            jobs.push(Job::Period(p, Variant::Raw));
            jobs.push(Job::Period(p, Variant::Normalized));
        }
        if settings.analyses.calendar_weeks {
            jobs.push(Job::Calweek(p));
        }
    }
    let results: Vec<JobResult> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Period(p, v) => {
                let obs = period_observations(&p.responses, cal, v);
                fit_period_model(obs, &p.spec, v, settings.significance)
                    .map(|r| JobResult::Period(Box::new(r)))
                    .map_err(|e| e.context(format!("period model `{}` ({})", p.spec.name, v.as_str())))
            }
            Job::Calweek(p) => fit_calweek(&p.responses, cal, &p.spec)
                .map(|r| JobResult::Calweek(Box::new(r)))
                .map_err(|e| e.context(format!("calendar-week model `{}`", p.spec.name))),
        })
        .collect::<Result<_>>()?;
    let mut period = Vec::new();
    let mut calweek = Vec::new();
    for r in results {
        match r {
            JobResult::Period(r) => period.push(*r),
            JobResult::Calweek(r) => calweek.push(*r),
        }
    }
    Ok(Analysis {
        prepared,
        period,
        calweek,
        significance: settings.significance,
    })
}

/// Records plus where they came from.
pub struct LoadedData {
    pub records: RecordSet,
    pub rejections: Vec<Rejection>,
    pub truth: Option<GroundTruth>,
}

pub fn load_data(cfg: &RunConfig, cal: &PeriodCalendar) -> Result<LoadedData> {
    let offset = cfg.offset()?;
    if let Some(sim) = &cfg.simulate {
        let (rs, truth) = generate_cohort_with_calendar(sim, cal)?;
        return Ok(LoadedData {
            records: rs.with_utc_offset(offset),
            rejections: Vec::new(),
            truth: Some(truth),
        });
    }
    let mut sets = Vec::new();
    let mut rejections = Vec::new();
    for path in &cfg.inputs {
        let ctx = || format!("input {}", path.display());
        let file = fs::File::open(path).map_err(|e| Error::from(e).context(ctx()))?;
        let outcome = parse_records(std::io::BufReader::new(file), CsvSchema::MeasureRecordsV1)
            .map_err(|e| Error::from(e).context(ctx()))?;
        let file_name = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        rejections.extend(outcome.rejections.into_iter().map(|mut r| {
            if cfg.inputs.len() > 1 {
                r.reason = format!("{file_name}: {}", r.reason);
            }
            r
        }));
        sets.push(outcome.records);
    }
    let (records, dups) = RecordSet::merge(sets);
    for d in dups {
        rejections.push(Rejection {
            line: 0,
            reason: format!(
                "duplicate timestamp across inputs: {} {} {}",
                d.participant_id,
                d.measure,
                crate::ingest::format_timestamp(d.timestamp)
            ),
            key: Some((d.participant_id.to_string(), d.measure)),
        });
    }
    Ok(LoadedData {
        records: records.with_utc_offset(offset),
        rejections,
        truth: None,
    })
}

/// In-memory output tree, keyed by path relative to the output directory.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Artifacts {
    pub files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Artifacts {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(path.into(), bytes);
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(Path::new(path)).map(Vec::as_slice)
    }

    /// Writes every file into a staging directory next to `out`, then
    /// moves them into place; nothing lands in `out` unless all writes
    /// succeeded.
    pub fn write_to(&self, out: &Path) -> Result<()> {
        let parent = out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let name = out
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        let staged = (|| -> std::io::Result<()> {
            for (rel, bytes) in &self.files {
                let p = staging.join(rel);
                fs::create_dir_all(p.parent().expect("joined path has a parent"))?;
                let mut f = fs::File::create(&p)?;
                f.write_all(bytes)?;
                f.sync_all()?;
            }
            Ok(())
        })();
        if let Err(e) = staged {
            let _ = fs::remove_dir_all(&staging);
            return Err(Error::from(e).context(format!("staging outputs for {}", out.display())));
        }
        if !out.exists() {
            fs::rename(&staging, out)?;
            return Ok(());
        }
        for rel in self.files.keys() {
            let dst = out.join(rel);
            fs::create_dir_all(dst.parent().expect("joined path has a parent"))?;
            fs::rename(staging.join(rel), dst)?;
        }
        fs::remove_dir_all(&staging)?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::from(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::from(std::io::Error::other(e.to_string())))
}

#[derive(Serialize)]
struct PeriodSummary<'a> {
    model: &'a str,
    measure: Measure,
    variant: Variant,
    n_obs: usize,
    n_groups: usize,
    sigma2_gamma: f64,
    sigma2_eps: f64,
    r2_marginal: f64,
    r2_conditional: f64,
    reml_loglik: f64,
    bonferroni_m: usize,
    dropped_levels: &'a [String],
    significance: SignificanceMode,
    coefficients: Vec<CoefJson<'a>>,
}

#[derive(Serialize)]
struct CoefJson<'a> {
    term: &'a str,
    estimate: f64,
    se: f64,
    z: Option<f64>,
    p: Option<f64>,
    significant: bool,
}

#[derive(Serialize)]
struct CalweekSummary<'a> {
    model: &'a str,
    measure: Measure,
    variant: Variant,
    semester_median: f64,
    n_obs: usize,
    n_groups: usize,
    sigma2_gamma: f64,
    sigma2_eps: f64,
    r2_marginal: f64,
    r2_conditional: f64,
    weeks: Vec<&'a crate::lmm::WeekCoefficient>,
}

fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("summaries serialise");
    b.push(b'\n');
    b
}

/// Fixed-width text rendering of the period tables, one block per model
/// with raw and normalised columns side by side.
pub fn period_tables_text(period: &[PeriodModelResult]) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let mut models: Vec<&str> = Vec::new();
    for p in period {
        if !models.contains(&p.model.as_str()) {
            models.push(&p.model);
        }
    }
    for m in models {
        let raw = period.iter().find(|p| p.model == m && p.variant == Variant::Raw);
        let norm = period.iter().find(|p| p.model == m && p.variant == Variant::Normalized);
        let Some(any) = raw.or(norm) else { continue };
        let _ = writeln!(s, "{m} ({})", any.measure);
        let _ = writeln!(s, "{:<24} {:>20} {:>20}", "term", "raw", "normalized");
        for (i, row) in any.rows.iter().enumerate() {
            let cell = |r: Option<&PeriodModelResult>| {
                r.and_then(|r| r.rows.get(i).map(|c| (c, r.significant[i])))
                    .map(|(c, sig)| format!("{:.3} ({:.3}){}", c.estimate, c.se, if sig { "*" } else { "" }))
                    .unwrap_or_default()
            };
            let _ = writeln!(s, "{:<24} {:>20} {:>20}", row.term, cell(raw), cell(norm));
        }
        let stat = |r: Option<&PeriodModelResult>, f: fn(&LmmFit) -> String| r.map(|r| f(&r.fit)).unwrap_or_default();
        let _ = writeln!(
            s,
            "{:<24} {:>20} {:>20}",
            "N",
            stat(raw, |f| f.n_obs.to_string()),
            stat(norm, |f| f.n_obs.to_string())
        );
        let _ = writeln!(
            s,
            "{:<24} {:>20} {:>20}",
            "participants",
            stat(raw, |f| f.n_groups.to_string()),
            stat(norm, |f| f.n_groups.to_string())
        );
        let _ = writeln!(
            s,
            "{:<24} {:>20} {:>20}",
            "R2 marginal",
            stat(raw, |f| format!("{:.3}", f.r2_marginal)),
            stat(norm, |f| format!("{:.3}", f.r2_marginal))
        );
        let _ = writeln!(
            s,
            "{:<24} {:>20} {:>20}",
            "R2 conditional",
            stat(raw, |f| format!("{:.3}", f.r2_conditional)),
            stat(norm, |f| format!("{:.3}", f.r2_conditional))
        );
        let _ = writeln!(s);
    }
    for variant in [Variant::Raw, Variant::Normalized] {
        let pairs: Vec<(f64, f64)> = period
            .iter()
            .filter(|p| p.variant == variant)
            .map(|p| (p.fit.r2_marginal, p.fit.r2_conditional))
            .collect();
        if !pairs.is_empty() {
            let _ = writeln!(s, "{}\n{}\n", variant.as_str(), r2_footer(&pairs));
        }
    }
    s
}

/// Renders every artifact of an analysis.
pub fn render_artifacts(analysis: &Analysis, data: &LoadedData, cal: &PeriodCalendar) -> Result<Artifacts> {
    let mut a = Artifacts::default();

    if !analysis.period.is_empty() {
        let rows = analysis.period.iter().flat_map(|p| {
            p.rows.iter().zip(&p.significant).map(move |(r, &sig)| {
                vec![
                    p.model.clone(),
                    p.variant.as_str().to_string(),
                    r.term.clone(),
                    r.estimate.to_string(),
                    r.se.to_string(),
                    opt(r.z),
                    opt(r.p),
                    sig.to_string(),
                ]
            })
        });
        a.add(
            "period_coefficients.csv",
            csv_bytes(
                &["model", "variant", "term", "estimate", "se", "z", "p", "significant"],
                rows,
            )?,
        );
        let summaries: Vec<PeriodSummary> = analysis
            .period
            .iter()
            .map(|p| PeriodSummary {
                model: &p.model,
                measure: p.measure,
                variant: p.variant,
                n_obs: p.fit.n_obs,
                n_groups: p.fit.n_groups,
                sigma2_gamma: p.fit.sigma2_gamma,
                sigma2_eps: p.fit.sigma2_eps,
                r2_marginal: p.fit.r2_marginal,
                r2_conditional: p.fit.r2_conditional,
                reml_loglik: p.fit.reml_loglik,
                bonferroni_m: p.fit.bonferroni_m,
                dropped_levels: &p.fit.dropped_levels,
                significance: analysis.significance,
                coefficients: p
                    .rows
                    .iter()
                    .zip(&p.significant)
                    .map(|(r, &significant)| CoefJson {
                        term: &r.term,
                        estimate: r.estimate,
                        se: r.se,
                        z: r.z,
                        p: r.p,
                        significant,
                    })
                    .collect(),
            })
            .collect();
        a.add("period_summary.json", json_bytes(&summaries));
        a.add("period_tables.txt", period_tables_text(&analysis.period).into_bytes());
        for p in &analysis.period {
            let rows = p.observations.iter().map(|o| {
                vec![
                    o.participant_id.to_string(),
                    o.level.to_string(),
                    o.response.to_string(),
                ]
            });
            a.add(
                format!("intermediates/{}_period_{}.csv", p.model, p.variant.as_str()),
                csv_bytes(&["participant", "level", "response"], rows)?,
            );
        }
    }

    if !analysis.calweek.is_empty() {
        let rows = analysis.calweek.iter().flat_map(|c| {
            c.result.present().map(move |w| {
                vec![
                    c.model.clone(),
                    w.week.get().to_string(),
                    w.estimate.to_string(),
                    w.se.to_string(),
                    opt(w.z),
                    opt(w.p),
                    w.tier.as_str().to_string(),
                ]
            })
        });
        a.add(
            "calweek_coefficients.csv",
            csv_bytes(&["model", "week", "estimate", "se", "z", "p", "marker"], rows)?,
        );
        let summaries: Vec<CalweekSummary> = analysis
            .calweek
            .iter()
            .map(|c| CalweekSummary {
                model: &c.model,
                measure: c.measure,
                variant: c.variant,
                semester_median: c.result.semester_median,
                n_obs: c.result.fit.n_obs,
                n_groups: c.result.fit.n_groups,
                sigma2_gamma: c.result.fit.sigma2_gamma,
                sigma2_eps: c.result.fit.sigma2_eps,
                r2_marginal: c.result.fit.r2_marginal,
                r2_conditional: c.result.fit.r2_conditional,
                weeks: c.result.present().collect(),
            })
            .collect();
        a.add("calweek_summary.json", json_bytes(&summaries));
        for c in &analysis.calweek {
            let plot = WeekPlot::from_result(&c.model, c.variant == Variant::Normalized, &c.result);
            a.add(
                format!("calweek_{}.svg", c.model),
                emit_week_plot(&plot, cal).into_bytes(),
            );
            let rows = c.observations.iter().map(|o| {
                vec![
                    o.participant_id.to_string(),
                    o.level.get().to_string(),
                    o.response.to_string(),
                ]
            });
            a.add(
                format!("intermediates/{}_calweek.csv", c.model),
                csv_bytes(&["participant", "week", "response"], rows)?,
            );
        }
    }

    for p in &analysis.prepared {
        let mut buf = Vec::new();
        write_fit_dump(p.participants.iter().map(|x| (&x.sinusoid, &x.baseline)), &mut buf)
            .map_err(|e| Error::from(std::io::Error::other(e)))?;
        a.add(format!("fits/{}.csv", p.spec.name), buf);
    }
    let skipped = analysis
        .prepared
        .iter()
        .flat_map(|p| &p.skipped)
        .map(|s| vec![s.model.clone(), s.participant.clone(), s.reason.clone()]);
    a.add(
        "diagnostics/skipped.csv",
        csv_bytes(&["model", "participant", "reason"], skipped)?,
    );

    let shares = weekly_data_share(&data.records);
    let rows = shares.iter().flat_map(|(w, s)| {
        s.shares
            .iter()
            .map(move |(p, share)| vec![w.get().to_string(), p.clone(), share.to_string()])
    });
    a.add(
        "diagnostics/weekly_share.csv",
        csv_bytes(&["week", "participant", "share"], rows)?,
    );
    let rows = shares
        .iter()
        .map(|(w, s)| vec![w.get().to_string(), s.total.to_string(), s.max_share.to_string()]);
    a.add(
        "diagnostics/weekly_totals.csv",
        csv_bytes(&["week", "records", "max_share"], rows)?,
    );

    let mut buf = Vec::new();
    usage_matrix(&data.records).write_csv(&mut buf)?;
    a.add("diagnostics/usage_matrix.csv", buf);
    let mut buf = Vec::new();
    write_rejections(&data.rejections, &mut buf)?;
    a.add("diagnostics/rejections.csv", buf);

    if let Some(truth) = &data.truth {
        let mut buf = Vec::new();
        truth_report(truth, &mut buf).map_err(|e| Error::from(std::io::Error::other(e)))?;
        a.add("truth.csv", buf);
    }
    Ok(a)
}

/// Reads `COHORT_PULSE_THREADS`; `None` means the machine default.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

pub struct RunOutput {
    pub analysis: Analysis,
    pub artifacts: Artifacts,
}

/// Loads or simulates data, fits every model and renders the artifacts,
/// without touching the filesystem beyond reading inputs.
pub fn compute(cfg: &RunConfig, threads: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let cal = cfg.period_calendar()?;
        let data = load_data(cfg, &cal)?;
        let analysis = analyze(&data.records, &cal, &AnalysisSettings::from_config(cfg))?;
        let artifacts = render_artifacts(&analysis, &data, &cal)?;
        Ok(RunOutput { analysis, artifacts })
    })
}

/// [`compute`] followed by an all-or-nothing write into `cfg.out`.
pub fn run(cfg: &RunConfig, threads: Option<usize>) -> Result<RunOutput> {
    let out = compute(cfg, threads)?;
    out.artifacts.write_to(&cfg.out)?;
    Ok(out)
}

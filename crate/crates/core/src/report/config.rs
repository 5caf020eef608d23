use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::FixedOffset;
use serde::{Deserialize, Serialize};

use crate::calendar::{build_calendar, PeriodCalendar, PeriodConfig};
use crate::error::{Error, Result};
use crate::ingest::{default_offset, Measure};
use crate::lmm::SignificanceMode;
use crate::preprocess::BaselineOptions;
use crate::simulate::SimConfig;

/// One analysed signal and its preparation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Artifact name; `[A-Za-z0-9_-]+`.
    pub name: String,
    pub measure: Measure,
    /// Remove the fitted annual sinusoid before the baseline fit.
    #[serde(default)]
    pub detrend: bool,
    /// Aggregate to one maximum per local day before modelling.
    #[serde(default)]
    pub daily_max: bool,
    /// Use the normalised variant for the calendar-week model. Period
    /// models always report both variants.
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    pub fn new(name: &str, measure: Measure, detrend: bool, daily_max: bool) -> Self {
        Self {
            name: name.to_string(),
            measure,
            detrend,
            daily_max,
            normalize: true,
        }
    }
}

/// Sleep HR and HRV (detrended), waking HR, and daily-max waking HR.
pub fn default_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new("sleep_hr", Measure::SleepHr, true, false),
        ModelSpec::new("sleep_hrv", Measure::SleepHrv, true, false),
        ModelSpec::new("waking_hr", Measure::WakingHr, false, false),
        ModelSpec::new("waking_hr_max", Measure::WakingHr, false, true),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    #[serde(default = "yes")]
    pub periods: bool,
    #[serde(default = "yes")]
    pub calendar_weeks: bool,
}

impl Default for Analyses {
    fn default() -> Self {
        Self {
            periods: true,
            calendar_weeks: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Measurement CSVs; mutually exclusive with `simulate`.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub simulate: Option<SimConfig>,
    #[serde(default = "default_models", rename = "model")]
    pub models: Vec<ModelSpec>,
    /// Period calendar TOML; the built-in academic calendar when absent.
    #[serde(default)]
    pub calendar: Option<PathBuf>,
    #[serde(default)]
    pub analyses: Analyses,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub significance: SignificanceMode,
    /// Cohort offset such as `+09:00`; defaults to the simulator's offset or +09:00.
    #[serde(default)]
    pub utc_offset: Option<String>,
    #[serde(default)]
    pub baseline: BaselineOptions,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            simulate: None,
            models: default_models(),
            calendar: None,
            analyses: Analyses::default(),
            out: default_out(),
            significance: SignificanceMode::default(),
            utc_offset: None,
            baseline: BaselineOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn simulated(sim: SimConfig) -> Self {
        Self {
            simulate: Some(sim),
            ..Self::default()
        }
    }

    /// Parses TOML; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in cfg
            .inputs
            .iter_mut()
            .chain(cfg.calendar.iter_mut())
            .chain([&mut cfg.out])
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.analyses.periods && !self.analyses.calendar_weeks {
            return bad("at least one analysis must be selected".into());
        }
        match (self.inputs.is_empty(), &self.simulate) {
            (true, None) => return bad("either `inputs` or a `[simulate]` block is required".into()),
            (false, Some(_)) => return bad("`inputs` and `[simulate]` are mutually exclusive".into()),
            _ => {}
        }
        if let Some(sim) = &self.simulate {
            sim.validate()?;
        }
        for p in self.inputs.iter().chain(&self.calendar) {
            if !p.is_file() {
                return bad(format!("referenced file {} does not exist", p.display()));
            }
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            let ok = !m.name.is_empty()
                && m.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return bad(format!("model name `{}` must match [A-Za-z0-9_-]+", m.name));
            }
            if !names.insert(&m.name) {
                return bad(format!("duplicate model name `{}`", m.name));
            }
        }
        match self.significance {
            SignificanceMode::Threshold { alpha } | SignificanceMode::Strict { alpha }
                if !(alpha > 0.0 && alpha < 1.0) =>
            {
                return bad("significance alpha must be in (0, 1)".into());
            }
            _ => {}
        }
        self.offset()?;
        Ok(())
    }

    pub fn offset(&self) -> Result<FixedOffset> {
        match (&self.utc_offset, &self.simulate) {
            (Some(s), _) => s
                .parse()
                .map_err(|_| Error::Config(format!("bad utc_offset `{s}` (expected e.g. +09:00)"))),
            (None, Some(sim)) => Ok(sim.utc_offset()),
            (None, None) => Ok(default_offset()),
        }
    }

    pub fn period_calendar(&self) -> Result<PeriodCalendar> {
        let cfg = match &self.calendar {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::from(e).context(format!("reading {}", p.display())))?;
                PeriodConfig::from_toml(&text)?
            }
            None => PeriodConfig::academic_default(),
        };
        Ok(build_calendar(&cfg)?)
    }

    /// Applies `--seed`; only meaningful with a `[simulate]` block.
    pub fn with_seed(mut self, seed: u64) -> Result<Self> {
        match &mut self.simulate {
            Some(sim) => sim.seed = seed,
            None => return Err(Error::Config("--seed requires a [simulate] block".into())),
        }
        Ok(self)
    }

    /// Applies `--strict-bonferroni`, keeping a configured strict alpha.
    pub fn with_strict_bonferroni(mut self) -> Self {
        if !matches!(self.significance, SignificanceMode::Strict { .. }) {
            self.significance = SignificanceMode::Strict { alpha: 0.05 };
        }
        self
    }
}

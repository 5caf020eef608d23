use serde::{Deserialize, Serialize};

use super::design::{encode_design, Observation, Reference};
use super::inference::wald_inference;
use super::reml::{fit_reml, LmmFit};
use crate::calendar::WeekIndex;
use crate::error::LmmError;

/// Plot marker tier of a week coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerTier {
    /// p ≥ 0.1
    Plain,
    /// p < 0.1
    Circle,
    /// p < 0.05
    Square,
}

impl MarkerTier {
    pub fn from_p(p: Option<f64>) -> Self {
        match p {
            Some(p) if p < 0.05 => MarkerTier::Square,
            Some(p) if p < 0.1 => MarkerTier::Circle,
            _ => MarkerTier::Plain,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MarkerTier::Plain => "plain",
            MarkerTier::Circle => "p<0.1",
            MarkerTier::Square => "p<0.05",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekCoefficient {
    pub week: WeekIndex,
    pub estimate: f64,
    pub se: f64,
    pub z: Option<f64>,
    pub p: Option<f64>,
    pub tier: MarkerTier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalweekResult {
    /// Index `w − 1` holds week `w`; `None` for weeks without data.
    pub weeks: Vec<Option<WeekCoefficient>>,
    pub semester_median: f64,
    pub fit: LmmFit,
}

impl CalweekResult {
    pub fn present(&self) -> impl Iterator<Item = &WeekCoefficient> {
        self.weeks.iter().flatten()
    }
}

/// Calendar-week model: responses centred on `semester_median`, one
/// indicator per week (no global intercept), random intercept per
/// participant.
pub fn calweek_model(obs: &[Observation<WeekIndex>], semester_median: f64) -> Result<CalweekResult, LmmError> {
    let centred: Vec<Observation<WeekIndex>> = obs
        .iter()
        .map(|o| Observation {
            participant_id: o.participant_id.clone(),
            response: o.response - semester_median,
            level: o.level,
        })
        .collect();
    let domain: Vec<WeekIndex> = WeekIndex::all().collect();
    let design = encode_design(&centred, &Reference::NoIntercept, Some(&domain))?;
    let fit = fit_reml(&design)?;
    let mut weeks = vec![None; 52];
    for row in wald_inference(&fit) {
        let week = domain
            .iter()
            .copied()
            .find(|w| w.to_string() == row.term)
            .expect("term names come from week levels");
        weeks[week.get() as usize - 1] = Some(WeekCoefficient {
            week,
            estimate: row.estimate,
            se: row.se,
            z: row.z,
            p: row.p,
            tier: MarkerTier::from_p(row.p),
        });
    }
    Ok(CalweekResult {
        weeks,
        semester_median,
        fit,
    })
}

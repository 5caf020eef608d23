use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::calendar::{PeriodLabel, WeekIndex};
use crate::error::LmmError;

/// A level of the single categorical fixed effect.
pub trait FactorLevel: Ord + Clone + fmt::Display + Send + Sync {}

impl FactorLevel for PeriodLabel {}
impl FactorLevel for WeekIndex {}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation<L> {
    pub participant_id: Arc<str>,
    pub response: f64,
    pub level: L,
}

impl<L> Observation<L> {
    pub fn new(participant_id: impl Into<Arc<str>>, response: f64, level: L) -> Self {
        Self {
            participant_id: participant_id.into(),
            response,
            level,
        }
    }
}

/// Coding of the categorical factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference<L> {
    /// Intercept column for this level plus one dummy per other level.
    Level(L),
    /// One indicator column per level, no global intercept.
    NoIntercept,
}

/// Response, fixed-effects matrix (row-compressed) and participant grouping.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    response: Vec<f64>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    groups: Vec<usize>,
    group_names: Vec<Arc<str>>,
    columns: Vec<String>,
    intercept: bool,
    dropped_levels: Vec<String>,
}

impl DesignMatrix {
    /// Builds a design from a dense `X`. Rows map to groups via `groups`
    /// (indices into `group_names`).
    pub fn from_dense(
        response: Vec<f64>,
        x: &DMatrix<f64>,
        groups: Vec<usize>,
        group_names: Vec<Arc<str>>,
        columns: Vec<String>,
        intercept: bool,
    ) -> Result<Self, LmmError> {
        let n = response.len();
        if x.nrows() != n || groups.len() != n || columns.len() != x.ncols() {
            return Err(LmmError::Encode("dimension mismatch".into()));
        }
        if groups.iter().any(|&g| g >= group_names.len()) {
            return Err(LmmError::Encode("group index out of range".into()));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..x.ncols() {
                if x[(i, j)] != 0.0 {
                    col_idx.push(j);
                    values.push(x[(i, j)]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            response,
            row_ptr,
            col_idx,
            values,
            groups,
            group_names,
            columns,
            intercept,
            dropped_levels: Vec::new(),
        })
    }

    pub fn n_obs(&self) -> usize {
        self.response.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_names(&self) -> &[Arc<str>] {
        &self.group_names
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Levels in the declared domain that had no rows.
    pub fn dropped_levels(&self) -> &[String] {
        &self.dropped_levels
    }

    /// Non-zero entries `(column, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n_obs(), self.n_cols());
        for i in 0..self.n_obs() {
            for (j, v) in self.row(i) {
                x[(i, j)] = v;
            }
        }
        x
    }

    /// Copy with the response replaced.
    pub fn with_response(&self, response: Vec<f64>) -> Self {
        assert_eq!(response.len(), self.n_obs());
        Self {
            response,
            ..self.clone()
        }
    }
}

/// Dummy-codes a single categorical factor.
///
/// `domain` lists every level the factor may take; levels without rows are
/// dropped and reported. With `None` the domain is the observed levels.
pub fn encode_design<L: FactorLevel>(
    obs: &[Observation<L>],
    reference: &Reference<L>,
    domain: Option<&[L]>,
) -> Result<DesignMatrix, LmmError> {
    if obs.is_empty() {
        return Err(LmmError::Encode("no observations".into()));
    }
    if let Some(o) = obs.iter().find(|o| !o.response.is_finite()) {
        return Err(LmmError::Encode(format!(
            "non-finite response for participant `{}`",
            o.participant_id
        )));
    }
    let present: BTreeSet<&L> = obs.iter().map(|o| &o.level).collect();
    if let Some(domain) = domain {
        if let Some(o) = obs.iter().find(|o| !domain.contains(&o.level)) {
            return Err(LmmError::Encode(format!(
                "level `{}` outside the factor domain",
                o.level
            )));
        }
    }
    if present.len() < 2 {
        return Err(LmmError::Encode("all rows share one level".into()));
    }
    let dropped_levels: Vec<String> = domain
        .map(|d| {
            let declared: BTreeSet<&L> = d.iter().collect();
            declared
                .into_iter()
                .filter(|l| !present.contains(l))
                .map(|l| l.to_string())
                .collect()
        })
        .unwrap_or_default();

    let (intercept, dummy_levels): (bool, Vec<&L>) = match reference {
        Reference::Level(r) => {
            if !present.contains(r) {
                return Err(LmmError::Encode(format!("reference level `{r}` has no rows")));
            }
            (true, present.iter().copied().filter(|l| *l != r).collect())
        }
        Reference::NoIntercept => (false, present.iter().copied().collect()),
    };
    let mut columns = Vec::with_capacity(dummy_levels.len() + 1);
    if let Reference::Level(r) = reference {
        columns.push(format!("intercept ({r})"));
    }
    columns.extend(dummy_levels.iter().map(|l| l.to_string()));
    let offset = usize::from(intercept);
    let col_of: BTreeMap<&L, usize> = dummy_levels.iter().enumerate().map(|(j, l)| (*l, j + offset)).collect();

    let names: BTreeSet<&Arc<str>> = obs.iter().map(|o| &o.participant_id).collect();
    let group_names: Vec<Arc<str>> = names.into_iter().cloned().collect();
    let group_of: BTreeMap<&str, usize> = group_names.iter().enumerate().map(|(i, g)| (&**g, i)).collect();

    let mut row_ptr = Vec::with_capacity(obs.len() + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::with_capacity(obs.len() * 2);
    let mut values = Vec::with_capacity(obs.len() * 2);
    let mut groups = Vec::with_capacity(obs.len());
    let mut response = Vec::with_capacity(obs.len());
    for o in obs {
        if intercept {
            col_idx.push(0);
            values.push(1.0);
        }
        if let Some(&j) = col_of.get(&o.level) {
            col_idx.push(j);
            values.push(1.0);
        }
        row_ptr.push(col_idx.len());
        groups.push(group_of[&*o.participant_id]);
        response.push(o.response);
    }
    Ok(DesignMatrix {
        response,
        row_ptr,
        col_idx,
        values,
        groups,
        group_names,
        columns,
        intercept,
        dropped_levels,
    })
}

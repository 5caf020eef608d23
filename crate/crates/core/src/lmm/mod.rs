//! Linear mixed-effects models with a per-participant random intercept and
//! a single categorical fixed effect, fit by REML.

mod calweek;
mod design;
mod inference;
mod reml;

pub use calweek::{calweek_model, CalweekResult, MarkerTier, WeekCoefficient};
pub use design::{encode_design, DesignMatrix, FactorLevel, Observation, Reference};
pub use inference::{bonferroni_flags, r2_footer, r2_nakagawa, two_sided_p, wald_inference, CoefRow, SignificanceMode};
pub use reml::{fit_at_ratio, fit_reml, fit_reml_with, LmmFit, RemlOptions, RemlProblem};

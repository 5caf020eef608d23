use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::design::DesignMatrix;
use super::reml::LmmFit;
use crate::error::LmmError;

/// Two-sided normal p-value for a Wald statistic.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() * std::f64::consts::FRAC_1_SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    /// `None` when the coefficient is not estimable (se = 0).
    pub z: Option<f64>,
    pub p: Option<f64>,
}

pub fn wald_inference(f: &LmmFit) -> Vec<CoefRow> {
    f.terms
        .iter()
        .zip(f.beta.iter().zip(&f.se))
        .map(|(term, (&estimate, &se))| {
            let estimable = se > 0.0 && se.is_finite();
            let z = estimable.then(|| estimate / se);
            CoefRow {
                term: term.clone(),
                estimate,
                se,
                z,
                p: z.map(two_sided_p),
            }
        })
        .collect()
}

/// Significance rule for coefficient flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SignificanceMode {
    /// Raw p below a fixed threshold (0.001 by default); the comparison
    /// count is reported alongside.
    Threshold { alpha: f64 },
    /// Bonferroni: `p · m < alpha`.
    Strict { alpha: f64 },
}

impl Default for SignificanceMode {
    fn default() -> Self {
        SignificanceMode::Threshold { alpha: 0.001 }
    }
}

impl SignificanceMode {
    pub fn is_significant(self, p: f64, m: usize) -> bool {
        match self {
            SignificanceMode::Threshold { alpha } => p < alpha,
            SignificanceMode::Strict { alpha } => p * (m.max(1) as f64) < alpha,
        }
    }
}

pub fn bonferroni_flags(p_values: &[Option<f64>], m: usize, mode: SignificanceMode) -> Vec<bool> {
    assert!(m >= 1, "comparison count must be at least 1");
    p_values
        .iter()
        .map(|p| p.is_some_and(|p| mode.is_significant(p, m)))
        .collect()
}

/// Marginal and conditional R² of a random-intercept model:
/// `var(Xβ̂) / (var(Xβ̂) + σ²_γ + σ²_ε)` and `(var(Xβ̂) + σ²_γ) / (…)`,
/// with the variance taken over observations (1/N).
pub fn r2_nakagawa(f: &LmmFit, d: &DesignMatrix) -> Result<(f64, f64), LmmError> {
    let n = d.n_obs();
    let fitted: Vec<f64> = (0..n).map(|i| d.row(i).map(|(j, v)| v * f.beta[j]).sum()).collect();
    let var_fixed = if fitted.iter().all(|&v| v == fitted[0]) {
        0.0
    } else {
        let mean = fitted.iter().sum::<f64>() / n as f64;
        fitted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
    };
    let total = var_fixed + f.sigma2_gamma + f.sigma2_eps;
    if !(total > 0.0) {
        return Err(LmmError::ZeroVariance);
    }
    Ok((var_fixed / total, (var_fixed + f.sigma2_gamma) / total))
}

/// Table footer with one R² pair per model, as two bracketed lists:
/// `R2_marginal=[0.016, 0.041]` and `R2_conditional=[…]`.
pub fn r2_footer(pairs: &[(f64, f64)]) -> String {
    let list = |f: fn(&(f64, f64)) -> f64| {
        pairs
            .iter()
            .map(|p| format!("{:.3}", f(p)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!("R2_marginal=[{}]\nR2_conditional=[{}]", list(|p| p.0), list(|p| p.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_values() {
        assert_eq!(two_sided_p(0.0), 1.0);
        assert!((two_sided_p(1.96) - 0.05).abs() < 1e-3);
        assert!((two_sided_p(-1.96) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn flags() {
        let ps = [Some(1.0), Some(5e-4), None, Some(0.004)];
        let t = bonferroni_flags(&ps, 8, SignificanceMode::default());
        assert_eq!(t, vec![false, true, false, false]);
        let s = bonferroni_flags(&ps, 8, SignificanceMode::Strict { alpha: 0.05 });
        assert_eq!(s, vec![false, true, false, true]);
        let s = bonferroni_flags(&ps, 20, SignificanceMode::Strict { alpha: 0.05 });
        assert_eq!(s, vec![false, true, false, false]);
    }

    #[test]
    fn footer_lists() {
        let f = r2_footer(&[(0.016, 0.5), (0.041, 0.6), (0.034, 0.7), (0.035, 0.8)]);
        assert_eq!(
            f,
            "R2_marginal=[0.016, 0.041, 0.034, 0.035]\nR2_conditional=[0.500, 0.600, 0.700, 0.800]"
        );
    }

    #[test]
    fn non_estimable_row() {
        let f = LmmFit {
            terms: vec!["a".into(), "b".into()],
            beta: vec![0.0, 1.0],
            se: vec![1.0, 0.0],
            p_values: vec![Some(1.0), None],
            sigma2_gamma: 0.0,
            sigma2_eps: 1.0,
            variance_ratio: 0.0,
            r2_marginal: 0.0,
            r2_conditional: 0.0,
            reml_loglik: 0.0,
            n_obs: 10,
            n_groups: 2,
            bonferroni_m: 1,
            has_intercept: true,
            dropped_levels: vec![],
        };
        let rows = wald_inference(&f);
        assert_eq!(rows[0].p, Some(1.0));
        assert_eq!(rows[1].z, None);
        assert_eq!(rows[1].p, None);
    }
}

//! Random-intercept model by REML on a period factor: variance components,
//! Wald tests, Bonferroni flags and R².
//!
//! ```text
//! cargo run --example reml_one_way
//! ```

use cohort_pulse::calendar::PeriodLabel;
use cohort_pulse::lmm::{
    bonferroni_flags, encode_design, fit_reml, r2_footer, wald_inference, Observation, Reference, SignificanceMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let person = Normal::new(0.0, 2.0)?;
    let noise = Normal::new(0.0, 1.0)?;
    let levels = [PeriodLabel::Semester, PeriodLabel::SpringExam, PeriodLabel::SummerBreak];
    let effect = [0.0, 0.6, -0.2];

    let mut obs = Vec::new();
    for p in 0..30 {
        let u = person.sample(&mut rng);
        for _ in 0..40 {
            let l = rng.random_range(0..3);
            let y = 60.0 + u + effect[l] + noise.sample(&mut rng);
            obs.push(Observation::new(format!("P{p:03}"), y, levels[l]));
        }
    }

    let design = encode_design(&obs, &Reference::Level(PeriodLabel::Semester), Some(&PeriodLabel::ALL))?;
    println!("columns: {:?}", design.columns());
    println!("dropped (no data): {:?}", design.dropped_levels());

    let fit = fit_reml(&design)?;
    println!(
        "sigma2_gamma = {:.3}  sigma2_eps = {:.3}  ratio = {:.3}  REML loglik = {:.2}",
        fit.sigma2_gamma, fit.sigma2_eps, fit.variance_ratio, fit.reml_loglik
    );

    let rows = wald_inference(&fit);
    let strict = bonferroni_flags(
        &fit.p_values,
        fit.bonferroni_m,
        SignificanceMode::Strict { alpha: 0.05 },
    );
    // the reference intercept is not a compared level
    for (i, (r, flag)) in rows.iter().zip(strict).enumerate() {
        println!(
            "{:<22} {:8.3} ± {:.3}  p = {:.2e} {}",
            r.term,
            r.estimate,
            r.se,
            r.p.unwrap_or(f64::NAN),
            if flag && i > 0 { "*" } else { "" }
        );
    }
    println!("{}", r2_footer(&[(fit.r2_marginal, fit.r2_conditional)]));
    Ok(())
}

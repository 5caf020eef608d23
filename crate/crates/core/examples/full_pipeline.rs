//! The whole analysis from a run config: simulate, preprocess, fit period
//! and calendar-week models, and write every artifact.
//!
//! ```text
//! cargo run --release --example full_pipeline -- out_dir
//! ```

use std::path::PathBuf;

use cohort_pulse::report::{run, RunConfig, Variant};

const CONFIG: &str = r#"
out = "pipeline_out"

[significance]
mode = "strict"
alpha = 0.05

[simulate]
seed = 17
n_participants = 40

[[simulate.planted]]
measure = "waking_hr"
period = "summer_exam"
shift = 0.42

[[model]]
name = "sleep_hr"
measure = "sleep_hr"
detrend = true

[[model]]
name = "waking_hr_max"
measure = "waking_hr"
daily_max = true
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::from_toml(CONFIG, &std::env::current_dir()?)?;
    if let Some(dir) = std::env::args().nth(1) {
        cfg.out = PathBuf::from(dir);
    }
    let out = run(&cfg, None)?;

    for p in &out.analysis.period {
        if p.variant != Variant::Normalized {
            continue;
        }
        let flagged: Vec<String> = p
            .rows
            .iter()
            .zip(&p.significant)
            .filter(|(_, &s)| s)
            .map(|(r, _)| format!("{} {:+.3}", r.term, r.estimate))
            .collect();
        println!("{:<14} N = {:<7} flagged: {}", p.model, p.fit.n_obs, flagged.join(", "));
    }
    for p in &out.analysis.prepared {
        println!("{}: {} participants skipped", p.spec.name, p.skipped.len());
    }
    println!("\nwrote {} files to {}", out.artifacts.files.len(), cfg.out.display());
    for path in out.artifacts.files.keys() {
        println!("  {}", path.display());
    }
    Ok(())
}

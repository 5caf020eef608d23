use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cohort_pulse::ingest::{parse_records, write_records, CsvSchema, Measure};
use cohort_pulse::report::{run, threads_from_env, ErrorReport, RunConfig};
use cohort_pulse::simulate::{generate_cohort, truth_report, SimConfig};
use cohort_pulse::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cohort-pulse",
    version,
    about = "Cohort stress biomarkers from wearable HR data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Simulator seed (requires a [simulate] block).
        #[arg(long)]
        seed: Option<u64>,
        /// Flag coefficients with Bonferroni p·m < alpha instead of the raw threshold.
        #[arg(long)]
        strict_bonferroni: bool,
    },
    /// Write a synthetic cohort as measurement CSV, with `<out>.truth.csv` alongside.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a measurement CSV; exits 3 when any row is rejected.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
}

fn cmd_run(config: &Path, out: Option<PathBuf>, seed: Option<u64>, strict: bool) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(out) = out {
        cfg.out = out;
    }
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed)?;
    }
    if strict {
        cfg = cfg.with_strict_bonferroni();
    }
    let result = run(&cfg, threads_from_env()?)?;
    let flagged: usize = result
        .analysis
        .period
        .iter()
        .map(|p| p.significant.iter().filter(|&&s| s).count())
        .sum();
    println!(
        "{}",
        serde_json::json!({
            "status": "ok",
            "out": cfg.out,
            "files": result.artifacts.files.len(),
            "significant_terms": flagged,
        })
    );
    Ok(ExitCode::SUCCESS)
}

/// Accepts a bare simulator config or a run config with a `[simulate]` block.
fn load_sim_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    match table.get("simulate") {
        Some(v) => {
            let cfg: SimConfig = v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
            cfg.validate()?;
            Ok(cfg)
        }
        None => Ok(SimConfig::from_toml(&text)?),
    }
}

fn cmd_simulate(config: &Path, out: &Path) -> Result<ExitCode> {
    let cfg = load_sim_config(config)?;
    let (rs, truth) = generate_cohort(&cfg)?;
    let mut data = Vec::new();
    write_records(&rs, &mut data)?;
    let mut truth_csv = Vec::new();
    truth_report(&truth, &mut truth_csv).map_err(|e| Error::from(std::io::Error::other(e)))?;
    let truth_path = out.with_extension("truth.csv");
    fs::write(out, data)?;
    fs::write(&truth_path, truth_csv)?;
    println!(
        "{}",
        serde_json::json!({
            "status": "ok",
            "records": rs.len(),
            "participants": rs.participants().len(),
            "out": out,
            "truth": truth_path,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(input: &Path) -> Result<ExitCode> {
    let file = fs::File::open(input).map_err(|e| Error::from(e).context(format!("opening {}", input.display())))?;
    let outcome = parse_records(BufReader::new(file), CsvSchema::MeasureRecordsV1)?;
    let mut per_measure = serde_json::Map::new();
    for m in Measure::ALL {
        let n = outcome.records.records().iter().filter(|r| r.measure == m).count();
        per_measure.insert(m.to_string(), n.into());
    }
    let participants: std::collections::BTreeSet<&str> =
        outcome.records.records().iter().map(|r| &*r.participant_id).collect();
    let rejections: Vec<_> = outcome
        .rejections
        .iter()
        .map(|r| serde_json::json!({"line": r.line, "reason": r.reason}))
        .collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "rows": outcome.rows_seen,
            "accepted": outcome.accepted(),
            "rejected": outcome.rejections.len(),
            "participants": participants.len(),
            "per_measure": per_measure,
            "rejections": rejections,
        }))
        .expect("json")
    );
    Ok(if outcome.rejections.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            out,
            seed,
            strict_bonferroni,
        } => cmd_run(config, out.clone(), *seed, *strict_bonferroni),
        Command::Simulate { config, out } => cmd_simulate(config, out),
        Command::Validate { input } => cmd_validate(input),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", ErrorReport::from_error(&e).to_json());
            ExitCode::FAILURE
        }
    }
}

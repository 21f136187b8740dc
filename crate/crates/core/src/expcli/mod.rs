//! Experiment harness: TOML configs, deterministic CSV output, text summaries
//! and the `robustlin` command line.

mod config;
mod experiments;
mod report;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{point_seed, replicate_seed, run_experiment, splitmix64, ExperimentOutput};
pub use report::{emit_summary, read_csv, summarize, write_csv, Row, Status, SummaryLine};

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::oracle::tradeoff_profile;
use crate::problem::{AttackNorm, ProblemSpec};

/// Environment variable giving the default worker count.
pub const JOBS_ENV: &str = "ROBUSTLIN_JOBS";

#[derive(Parser, Debug)]
#[command(name = "robustlin", version, about = "Accuracy/robustness tradeoffs for linear regression under norm-bounded attacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one experiment and write its rows as CSV.
    Run {
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        lam_scale: Option<f64>,
        /// Print the effective configuration as TOML and exit.
        #[arg(long)]
        print_config: bool,
        /// Also write the text summary (to stdout, or stderr when the CSV goes to stdout).
        #[arg(long)]
        summary: bool,
    },
    /// Run the bounds_check suite and report violations.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the tradeoff profile of one problem as JSON.
    Profile {
        /// Problem TOML file (`eigenvalues` or `spectrum`, `coeffs`, `noise_sd`).
        #[arg(long)]
        problem: PathBuf,
        /// Attacker norm, e.g. `l2`, `linf`, `l3`.
        #[arg(long)]
        norm: String,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        eps: f64,
    },
}

fn env_jobs() -> Result<Option<usize>> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{JOBS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// TOML file, then command-line flags, then `ROBUSTLIN_JOBS`, then defaults.
#[allow(clippy::too_many_arguments)]
fn effective_config(
    experiment: Option<String>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    replicates: Option<usize>,
    jobs: Option<usize>,
    lam_scale: Option<f64>,
) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_toml_str(&text)?
        }
        None => ExperimentConfig::empty(),
    };
    if let Some(tag) = experiment {
        cfg.experiment = Some(tag.parse()?);
    }
    cfg.out = out.or(cfg.out);
    cfg.seed = seed.or(cfg.seed);
    cfg.replicates = replicates.or(cfg.replicates);
    cfg.jobs = jobs.or(cfg.jobs);
    if cfg.jobs.is_none() {
        cfg.jobs = env_jobs()?;
    }
    cfg.lam_scale = lam_scale.or(cfg.lam_scale);
    cfg.with_defaults()
}

fn io_err(e: io::Error) -> Error {
    Error::Config(format!("I/O error: {e}"))
}

/// Entry point behind `main`: 0 on success, 2 on an invalid configuration,
/// 1 on any other error or on `check` violations.
pub fn run_cli(cli: Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) | Err(e @ Error::InvalidParameter(_)) | Err(e @ Error::UnsupportedNorm(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { experiment, config, out, seed, replicates, jobs, lam_scale, print_config, summary } => {
            let cfg = effective_config(experiment, config, out, seed, replicates, jobs, lam_scale)?;
            if print_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(ExitCode::SUCCESS);
            }
            let output = run_experiment(&cfg)?;
            let to_stdout = cfg.out.is_none();
            match &cfg.out {
                Some(path) => {
                    let f = File::create(path).map_err(io_err)?;
                    write_csv(&output.rows, BufWriter::new(f))?;
                }
                None => write_csv(&output.rows, io::stdout().lock())?,
            }
            if summary {
                let text = emit_summary(&output.rows)?;
                if to_stdout {
                    eprint!("{text}");
                } else {
                    print!("{text}");
                }
            }
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            if !output.warnings.is_empty() {
                eprintln!("{} warning(s)", output.warnings.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { seed, jobs } => {
            let cfg = ExperimentConfig {
                experiment: Some(ExperimentKind::BoundsCheck),
                seed: Some(seed),
                jobs: match jobs {
                    Some(j) => Some(j),
                    None => env_jobs()?,
                },
                ..ExperimentConfig::empty()
            };
            let output = run_experiment(&cfg)?;
            let bad: Vec<&Row> = output.rows.iter().filter(|r| r.status != Status::Ok).collect();
            let mut stdout = io::stdout().lock();
            for row in &bad {
                writeln!(
                    stdout,
                    "FAIL problem {} {}: {:?} slack {}",
                    row.sweep_value, row.metric_name, row.status, row.metric_value
                )
                .map_err(io_err)?;
            }
            writeln!(stdout, "bounds_check: {} checks, {} failing", output.rows.len(), bad.len()).map_err(io_err)?;
            Ok(if bad.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Profile { problem, norm, r, eps } => {
            let text = std::fs::read_to_string(&problem)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", problem.display())))?;
            let spec = ProblemSpec::from_toml_str(&text)?;
            let norm: AttackNorm = norm.parse()?;
            let profile = tradeoff_profile(&spec, &norm, r, eps)?;
            let json = serde_json::to_string_pretty(&profile).map_err(|e| Error::Config(e.to_string()))?;
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

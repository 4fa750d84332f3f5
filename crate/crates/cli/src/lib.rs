//! Command-line driver: config loading, subcommand dispatch and CSV output.

pub mod check;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::commands::{ConditionsRequest, DEFAULT_CONDITIONS_N_MAX};
use crate::config::{load_config_with, ConfigError, ExperimentConfig, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] growpop_core::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0} built-in check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "growpop",
    version,
    about = "Opinion dynamics with a growing population",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory and write its moment series as CSV.
    Simulate(RunArgs),
    /// Run an ensemble and write mean and standard error per grid point.
    Ensemble(RunArgs),
    /// Tabulate the condition sums and classify a power-exponential schedule.
    Conditions(ConditionsArgs),
    /// Tabulate the envelope bound for the configured schedule.
    Envelope(EnvelopeArgs),
    /// Run the built-in oracle suite.
    Check,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Worker threads for ensembles (default: all cores).
    #[arg(long, env = "GROWPOP_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConditionsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Rate for both condition sums (overrides the kernel bounds).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load(path: &std::path::Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let config = load_config_with(path, overrides)?;
    for w in &config.warnings {
        log::warn!("{w}");
    }
    Ok(config)
}

fn conditions_request(args: &ConditionsArgs) -> Result<ConditionsRequest, CliError> {
    let config = match &args.config {
        Some(p) => Some(load(
            p,
            &Overrides {
                alpha: args.alpha,
                lambda: args.lambda,
                ..Overrides::default()
            },
        )?),
        None => None,
    };
    let alpha = match (args.alpha, &config) {
        (Some(a), _) => a,
        (None, Some(c)) => match c.sim.schedule {
            growpop_core::GrowthSchedule::PowerExponential { alpha, .. } => alpha,
            _ => {
                return Err(CliError::Usage(
                    "conditions needs --alpha or a power_exp schedule".into(),
                ))
            }
        },
        (None, None) => {
            return Err(CliError::Usage(
                "conditions needs --alpha or --config".into(),
            ))
        }
    };
    let block = config.as_ref().and_then(|c| c.conditions.clone());
    let kernel = config.as_ref().map(|c| c.sim.kernel);
    let pick = |flag: Option<f64>, file: Option<f64>, from_kernel: Option<f64>| {
        flag.or(file).or(from_kernel).ok_or_else(|| {
            CliError::Usage("conditions needs --lambda or a config with a kernel".into())
        })
    };
    let lambda_star = pick(
        args.lambda,
        block.as_ref().and_then(|b| b.lambda_star),
        kernel.map(|k| k.psi_star()),
    )?;
    let lambda_max = pick(
        args.lambda,
        block.as_ref().and_then(|b| b.lambda_max),
        kernel.map(|k| k.psi_max()),
    )?;
    let n_max = args
        .n_max
        .or(block.as_ref().and_then(|b| b.n_max))
        .unwrap_or(DEFAULT_CONDITIONS_N_MAX);
    if n_max < 10 {
        return Err(CliError::Usage(format!(
            "--n-max must be at least 10, got {n_max}"
        )));
    }
    Ok(ConditionsRequest {
        alpha,
        lambda_star,
        lambda_max,
        n_max,
        per_decade: block.and_then(|b| b.per_decade).unwrap_or(1),
    })
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) | Command::Ensemble(args) if args.workers == Some(0) => {
            Err(CliError::Usage("--workers must be at least 1".into()))
        }
        Command::Simulate(args) => {
            let overrides = Overrides {
                seed: args.seed,
                runs: args.runs,
                out: args.out,
                alpha: args.alpha,
                lambda: None,
            };
            commands::simulate(&load(&args.config, &overrides)?)
        }
        Command::Ensemble(args) => {
            let overrides = Overrides {
                seed: args.seed,
                runs: args.runs,
                out: args.out,
                alpha: args.alpha,
                lambda: None,
            };
            commands::ensemble(&load(&args.config, &overrides)?, args.workers)
        }
        Command::Conditions(args) => {
            let req = conditions_request(&args)?;
            commands::conditions(&req, args.out.as_deref())
        }
        Command::Envelope(args) => {
            let overrides = Overrides {
                out: args.out,
                alpha: args.alpha,
                lambda: args.lambda,
                ..Overrides::default()
            };
            commands::envelope(&load(&args.config, &overrides)?, args.n_max)
        }
        Command::Check => {
            let results = check::run_checks();
            for r in &results {
                println!(
                    "[{}] {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
            match results.iter().filter(|r| !r.passed).count() {
                0 => Ok(()),
                n => Err(CliError::ChecksFailed(n)),
            }
        }
    }
}

/// Parse `argv`, run the command and return the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

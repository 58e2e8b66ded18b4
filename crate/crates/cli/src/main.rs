//! `ambiguity`: radius tables, coverage experiments, the storage dispatch
//! case study and an optimal-transport self-test.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    SelfTest(String),
    #[error(transparent)]
    Compute(#[from] ambiguity_core::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::SelfTest(_) => "selftest",
            CliError::Compute(_) => "compute",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ambiguity", version, about = "Wasserstein ambiguity radii for observed linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Directory receiving the output tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed of every random stream; required by stochastic commands.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct WithConfig {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set experiment.n=[20,80]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Nominal, noise and total radii over the configured (N, β) grid.
    RadiusTable(WithConfig),
    /// Monte Carlo coverage of the ambiguity guarantee.
    Coverage(WithConfig),
    /// SAA versus DRO dispatch with out-of-sample costs.
    Dispatch(WithConfig),
    /// Checks the transport solvers against exhaustive search.
    OtSelftest {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        instances: usize,
    },
}

fn require_seed(common: &Common, command: &str) -> Result<u64, CliError> {
    common
        .seed
        .ok_or_else(|| CliError::Usage(format!("{command} is stochastic and needs --seed")))
}

fn prepare_run(common: &Common) -> Result<(), CliError> {
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    }
    ensure_dir(&common.out)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::RadiusTable(args) => {
            let config = config::load(&args.config, &args.overrides)?;
            prepare_run(&args.common)?;
            commands::radius_table(&config, &args.common.out)
        }
        Command::Coverage(args) => {
            let seed = require_seed(&args.common, "coverage")?;
            let config = config::load(&args.config, &args.overrides)?;
            prepare_run(&args.common)?;
            commands::coverage(&config, &args.common.out, seed)
        }
        Command::Dispatch(args) => {
            let seed = require_seed(&args.common, "dispatch")?;
            let config = config::load(&args.config, &args.overrides)?;
            prepare_run(&args.common)?;
            commands::dispatch(&config, &args.common.out, seed)
        }
        Command::OtSelftest { common, instances } => {
            let seed = require_seed(&common, "ot-selftest")?;
            prepare_run(&common)?;
            commands::ot_selftest(&common.out, seed, instances)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let message = e.to_string().replace('\n', " | ");
            eprintln!("error: kind={} message={message}", e.kind());
            ExitCode::FAILURE
        }
    }
}

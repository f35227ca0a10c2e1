//! `mfabc`: benchmark tables, campaigns, replay studies and eta tuning from
//! a single experiment config file.
//!
//! Exit codes: 0 success, 1 simulation or estimation failure, 2 invalid
//! config, 3 I/O failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Command, Context};
use config::Scale;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl From<mfabc_core::Error> for CliError {
    fn from(e: mfabc_core::Error) -> Self {
        use mfabc_core::Error as E;
        match e {
            E::Model(_) | E::Invalid(_) | E::Json(_) => CliError::Config(e.to_string()),
            E::Io(_) | E::Csv(_) => CliError::Io(e.to_string()),
            E::Sim(_) | E::Abc(_) => CliError::Run(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mfabc", version, about = "Multifidelity ABC with early accept/reject")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism). Never changes results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Default sizes: desk or paper.
    #[arg(long, global = true, value_enum)]
    scale: Option<Scale>,
    /// Validate the config and print the plan without simulating.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Generate a coupled benchmark table.
    Benchmark,
    /// Run a rejection, fixed, optimal or adaptive campaign.
    Run,
    /// Replay study on a benchmark table (efficiency, variance or burn-in).
    Study,
    /// Estimate rates and report optimal continuation probabilities.
    Tune,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mfabc: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn real_main(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = config::parse(&path, &text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.scale {
        cfg.scale = s;
    }
    cfg.validate()?;
    if cli.workers == Some(0) {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let cmd = match cli.command {
        Cmd::Benchmark => Command::Benchmark,
        Cmd::Run => Command::Run,
        Cmd::Study => Command::Study,
        Cmd::Tune => Command::Tune,
    };
    let ctx = Context { cfg, config_path: path, out, workers };
    if cli.dry_run {
        let plan = commands::plan(&ctx, cmd);
        println!("{}", serde_json::to_string_pretty(&plan).expect("plan serialises"));
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;
    let manifest = commands::execute(&ctx, cmd)?;
    println!("{}", manifest.display());
    Ok(())
}

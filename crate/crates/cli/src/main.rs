//! `impactlab` — batch runner for the impact-laboratory library.
//!
//! Reads one experiment description (TOML), executes the single command it
//! contains, and writes all results as CSV files plus a `manifest.txt` of
//! content hashes into the output directory. Identical config and seed
//! produce byte-identical outputs.

mod config;
mod runner;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Errors split by origin: `Config` for anything wrong with the request
/// (exit code 2), `Runtime` for failures while executing a valid request
/// (exit code 3).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

#[derive(Parser)]
#[command(
    name = "impactlab",
    version,
    about = "Runs market-impact experiments described by a TOML config"
)]
struct Cli {
    /// Path to the experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the `seed` value in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep cells (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Suppress per-file progress lines.
    #[arg(long)]
    quiet: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", cli.config.display())))?;
    let parsed = config::parse_config(&text)?;
    let (command, cfg_seed, cfg_out) = parsed.into_command()?;

    let seed = cli.seed.or(cfg_seed).ok_or_else(|| {
        CliError::Config("seed: required (set `seed` in the config or pass --seed)".into())
    })?;
    let out_dir = cli.out.or(cfg_out).ok_or_else(|| {
        CliError::Config(
            "output_dir: required (set `output_dir` in the config or pass --out)".into(),
        )
    })?;

    let mut ctx = runner::RunContext::new(out_dir, seed, cli.quiet)?;
    match cli.workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
            pool.install(|| runner::execute(command, &mut ctx))
        }
        None => runner::execute(command, &mut ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

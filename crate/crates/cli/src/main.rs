use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use m2spec_cli::config::{self, CompareConfig, EstimateConfig, MethodName, MonteCarloFileConfig, SimulateConfig};
use m2spec_cli::{commands, CliError, Result};

/// Matrix spectral estimation of multidimensional fields.
#[derive(Parser, Debug)]
#[command(name = "m2spec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML, or JSON such as a previous run's sidecar).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed (simulate, montecarlo).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the method (estimate) or restricts the batch to one method (montecarlo).
    #[arg(long, global = true, value_enum)]
    method: Option<MethodName>,
    /// Worker threads for Monte-Carlo trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a signal field.
    Simulate,
    /// Estimate a spectrum from a signal file.
    Estimate,
    /// Write cross-sections of one or more spectra.
    Compare,
    /// Run a paired Monte-Carlo batch.
    Montecarlo,
}

fn load_or_default<T: serde::de::DeserializeOwned>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => config::load(p),
        None => Ok(toml::from_str("")?),
    }
}

fn require<T: serde::de::DeserializeOwned>(path: &Option<PathBuf>, command: &str) -> Result<T> {
    match path {
        Some(p) => config::load(p),
        None => Err(CliError::Validation(format!("{command} needs --config"))),
    }
}

fn reject(flag: &str, value: bool, command: &str) -> Result<()> {
    if value {
        return Err(CliError::Validation(format!("--{flag} does not apply to {command}")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate => {
            reject("method", cli.method.is_some(), "simulate")?;
            let mut cfg: SimulateConfig = load_or_default(&cli.config)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cfg.out = cli.out.unwrap_or(cfg.out);
            commands::simulate(&cfg)
        }
        Command::Estimate => {
            reject("seed", cli.seed.is_some(), "estimate")?;
            let mut cfg: EstimateConfig = require(&cli.config, "estimate")?;
            cfg.method = cli.method.unwrap_or(cfg.method);
            cfg.out = cli.out.unwrap_or(cfg.out);
            let (report, written) = commands::estimate(&cfg)?;
            let p = &report.peak;
            println!("peak at {:?} (1-based), frequencies {:?}", p.index, p.frequencies);
            Ok(written)
        }
        Command::Compare => {
            reject("seed", cli.seed.is_some(), "compare")?;
            reject("method", cli.method.is_some(), "compare")?;
            let mut cfg: CompareConfig = require(&cli.config, "compare")?;
            cfg.out = cli.out.unwrap_or(cfg.out);
            commands::compare(&cfg)
        }
        Command::Montecarlo => {
            let mut cfg: MonteCarloFileConfig = load_or_default(&cli.config)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cfg.out = cli.out.unwrap_or(cfg.out);
            if let Some(m) = cli.method {
                cfg.methods = vec![m];
            }
            commands::montecarlo(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(written) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

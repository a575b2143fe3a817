use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use covsense_cli::{render, run, Command, Format, RunConfig};

/// Covert quantum phase sensing experiments.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `scenario.N_B=320` (repeatable).
    #[arg(long = "set", value_name = "KEY=VAL")]
    sets: Vec<String>,
    /// Base RNG seed; grid point i draws from stream i
    #[arg(long)]
    seed: Option<u64>,
    /// Measurements per grid point.
    #[arg(long)]
    shots: Option<usize>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn execute(cli: Cli) -> Result<bool> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.sets)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(k) = cli.shots {
        cfg.shots = k;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build()?;
    let output = pool.install(|| run(cli.command, &cfg))?;
    let bytes = render(&output, &cfg)?;
    match &cfg.out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    for f in &output.failures {
        eprintln!("failed: {f}");
    }
    Ok(output.failures.is_empty())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

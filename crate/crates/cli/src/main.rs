//! `carma-qml`: simulate, estimate and inspect Lévy-driven MCARMA models.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Command;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "carma-qml", version, about = "Simulation and QML estimation of Levy-driven MCARMA models")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Euler-simulate replicates and write one CSV each plus a manifest.
    Simulate(Common),
    /// Fit every data file and write per-file results and a summary.
    Estimate(Common),
    /// Write continuous and sampled spectral densities over a frequency grid.
    Spectrum(Common),
    /// Print the identifiability pre-check report.
    Check(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; defaults reproduce the bivariate NIG study.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data CSV or simulation manifest; repeatable.
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for simulation and estimation, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> CliResult<()> {
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Estimate(c) => (Command::Estimate, c),
        Sub::Spectrum(c) => (Command::Spectrum, c),
        Sub::Check(c) => (Command::Check, c),
    };
    let mut cfg = config::load(common.config.as_deref())?;
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::config(format!("config is for {c:?}, but {command:?} was requested")));
        }
    }
    cfg.command = Some(command);
    if let Some(seed) = common.seed {
        cfg.simulation.seed = seed;
        cfg.estimation.seed = seed;
    }
    if let Some(out) = common.out {
        cfg.output_dir = out;
    }
    if !common.data.is_empty() {
        cfg.data = common.data;
    }
    if command != Command::Estimate {
        cfg.h.get_or_insert(1.0);
    }
    let resolved = cfg.resolve()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = common.jobs {
        if j == 0 {
            return Err(CliError::config("--jobs must be positive"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::config(e.to_string()))?;
    let output = pool.install(|| match command {
        Command::Simulate => commands::simulate(&resolved),
        Command::Estimate => commands::estimate(&resolved),
        Command::Spectrum => commands::spectrum(&resolved),
        Command::Check => commands::check(&resolved),
    })?;
    if command == Command::Check {
        println!("{}", serde_json::to_string_pretty(&output).expect("json values serialize"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

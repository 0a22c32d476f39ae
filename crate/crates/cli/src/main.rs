//! `lidar-retrieve`: batch front end for simulation, retrieval, noise
//! ensembles, parameter scans and the numerical self-checks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lidar_retrieval::verify::Fault;
use lidar_retrieval::Algorithm;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "lidar-retrieve", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; omitted fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated subset of kkt, kkt_l2, rl, tikhonov, weighted_tikhonov.
    #[arg(long, global = true, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for ensembles (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write truth, system function, noise-free and noisy signals.
    Simulate,
    /// Invert a signal file with each selected algorithm.
    Retrieve,
    /// Monte Carlo mean and std profiles per SNR multiplier.
    Ensemble,
    /// Discrepancy of the ensemble mean over a parameter grid.
    Scan,
    /// Run the numerical self-verification battery.
    Check {
        #[arg(long, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    GradientSign,
}

fn load(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(names) = &cli.algorithms {
        cfg.select_algorithms(names);
    }
    cfg.quiet |= cli.quiet;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = load(&cli)?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Retrieve => commands::retrieve_cmd(&cfg),
        Command::Ensemble => commands::ensemble(&cfg),
        Command::Scan => {
            commands::resolve_scan(&mut cfg)?;
            commands::scan(&cfg)
        }
        Command::Check { inject_fault } => {
            let fault = inject_fault.map(|FaultArg::GradientSign| Fault::GradientSignFlip);
            commands::check(cfg.seed, fault)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}

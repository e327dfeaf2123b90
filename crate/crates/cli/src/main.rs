//! `iel`: command-line front end of the invariance entropy laboratory.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid configuration,
//! 3 uncoverable `K`, 4 non-hyperbolic or untrusted splitting, 5 no alphabet
//! budget achieved invariance.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::artifacts::OutputDir;
use crate::config::{ConfigInvalid, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "iel", version, about = "Invariance entropy laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Size of the worker pool.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Cells per axis; overrides `grid.resolution`.
    #[arg(long, global = true)]
    resolution: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate one trajectory.
    Simulate,
    /// Control sets and chain control sets.
    Sets,
    /// Hyperbolic splitting, Morse spectrum and spectral entropy.
    Spectrum,
    /// Spanning-set entropy estimate.
    Entropy,
    /// Coder-controller simulation and critical rate scan.
    Channel,
    /// Parameter sweep with continuity diagnostics.
    Sweep,
    /// Check the configuration and print its hash.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sets => "sets",
            Command::Spectrum => "spectrum",
            Command::Entropy => "entropy",
            Command::Channel => "channel",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use iel_core::Error as E;
    if err.downcast_ref::<ConfigInvalid>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(E::Uncoverable { .. }) => 3,
        Some(E::NonHyperbolic { .. } | E::UntrustedSplitting(_)) => 4,
        Some(E::NoPass { .. }) => 5,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli.config.clone().ok_or_else(|| ConfigInvalid::at("", "--config is required"))?;
    let overrides = Overrides {
        out: cli.out.as_ref().map(|p| p.display().to_string()),
        seed: cli.seed,
        workers: cli.workers,
        resolution: cli.resolution,
    };
    let cfg = RunConfig::load(&path, &overrides)?;
    let hash = cfg.hash();
    if let Command::Validate = cli.command {
        println!("valid {hash}");
        return Ok(());
    }
    let mut out = OutputDir::create(commands::default_out_dir(&cfg), &hash, cli.command.name())?;
    log::info!("{} with config hash {hash}", cli.command.name());
    iel_core::par::with_workers(cfg.workers, || -> anyhow::Result<()> {
        commands::snapshot(&cfg, &mut out)?;
        match cli.command {
            Command::Simulate => commands::simulate(&cfg, &mut out),
            Command::Sets => commands::sets(&cfg, &mut out),
            Command::Spectrum => commands::spectrum(&cfg, &mut out),
            Command::Entropy => commands::entropy(&cfg, &mut out),
            Command::Channel => commands::channel(&cfg, &mut out),
            Command::Sweep => commands::sweep_cmd(&cfg, &mut out),
            Command::Validate => unreachable!(),
        }
    })?;
    out.finish()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IEL_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

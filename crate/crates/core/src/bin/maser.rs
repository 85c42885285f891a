use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use micromaser::config::validate_config;
use micromaser::error::{MaserError, Result};
use micromaser::runner::{run_scenario, write_outputs, Subcommand};

#[derive(Clone, Copy, ValueEnum)]
enum Command {
    /// Steady-state photon statistics and the matched amplitude
    Steady,
    /// Decay of the field amplitude and the fitted diffusion rate
    Diffuse,
    /// Counter-displacement probe protocol with the late-time fit
    Probe,
    /// Small-angle probe estimator
    Shorttime,
    /// Quantum-trajectory ensemble checked against the master equation
    Mcwf,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Steady => Subcommand::Steady,
            Command::Diffuse => Subcommand::Diffuse,
            Command::Probe => Subcommand::Probe,
            Command::Shorttime => Subcommand::Shorttime,
            Command::Mcwf => Subcommand::Mcwf,
        }
    }
}

/// Micromaser phase diffusion and probe-atom linewidth measurement.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file of `key = value` lines
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the Fock cutoff from the config
    #[arg(long)]
    n_max: Option<usize>,
}

fn run(cli: &Cli) -> Result<()> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| MaserError::Config(vec![format!("{}: {e}", cli.config.display())]))?;
    let mut cfg = validate_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.defaulted.retain(|k| k != "seed");
    }
    if let Some(n) = cli.n_max {
        cfg.n_max = n;
        cfg.defaulted.retain(|k| k != "n_max");
    }
    cfg.validate()?;
    let out = run_scenario(cli.command.into(), &cfg)?;
    write_outputs(&cli.out, &cfg, &out)?;
    for (k, v) in &out.summary {
        println!("{k} = {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .parse_filters(&std::env::var("MASER_LOG").unwrap_or_else(|_| "warn".into()))
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

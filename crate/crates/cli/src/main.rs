use std::path::PathBuf;
use std::process::ExitCode;

use alignmem::Execution;
use alignmem_cli::commands::{self, Options, Outcome};
use alignmem_cli::config::{ConfigError, RunConfig};
use alignmem_cli::exit_code;
use anyhow::Result;
use clap::{Args, Parser, Subcommand};

/// Gradient-echo memory driven by molecular alignment.
///
/// Exit status: 0 success, 2 configuration error, 3 numerical
/// non-convergence, 4 no emission detected (outputs are still written).
#[derive(Parser)]
#[command(name = "alignmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Thermal alignment and refractive-index traces.
    Align(Common),
    /// Full storage run: fields, spectra and the memory record.
    Memory(Common),
    /// Efficiency against optical depth.
    Sweep(Common),
    /// Spectra, spectrograms and fringe analysis of a storage run.
    Spectrum(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplies every sampling step (tau step capped at the carrier limit).
    #[arg(long, default_value_t = 1.0)]
    grid_scale: f64,
}

fn run(cli: Cli) -> Result<Outcome> {
    let (common, cmd): (&Common, fn(&RunConfig, &Options) -> Result<Outcome>) = match &cli.command {
        Command::Align(c) => (c, commands::align),
        Command::Memory(c) => (c, commands::memory),
        Command::Sweep(c) => (c, commands::sweep),
        Command::Spectrum(c) => (c, commands::spectrum_cmd),
    };
    let cfg = RunConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| ConfigError("no output directory: pass --out or set output.dir".into()))?;
    if !(common.grid_scale > 0.0 && common.grid_scale.is_finite()) {
        return Err(ConfigError(format!("--grid-scale must be positive, got {}", common.grid_scale)).into());
    }
    let execution = match common.threads {
        Some(0) => return Err(ConfigError("--threads must be at least 1".into()).into()),
        Some(1) => Execution::Sequential,
        Some(n) => {
            alignmem::exec::set_threads(n);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    std::fs::create_dir_all(&out).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", out.display()))?;
    cmd(&cfg, &Options { out, grid_scale: common.grid_scale, execution })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NoEmission) => {
            eprintln!("alignmem: no emission detected; outputs written");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("alignmem: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use cavity_bell_cli::{cmd_chsh, cmd_collapse, cmd_evolve, cmd_frames, cmd_sample, CliError, RunConfig};

/// Classical cavity-field analog of an entangled pair: CHSH evaluation,
/// nodal-line frames, envelope evolution, sampled reconstruction and
/// parity-feedback collapse.
#[derive(Parser)]
#[command(name = "cavity-bell", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` config file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for sampling and collapse studies.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Propagator: mode | splitstep.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// CHSH settings: optimal | paper | explicit.
    #[arg(long, global = true)]
    settings: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Correlators, reference quadruple and optimized CHSH value.
    Chsh,
    /// Rotation-rate fit and the four nodal-phase frames.
    Frames,
    /// Propagate the entangled field and compare with exact phases.
    Evolve,
    /// Reconstruction and CHSH estimation from noisy antenna samples.
    Sample,
    /// Parity-feedback collapse statistics.
    Collapse,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.apply_overrides(
        cli.out.clone(),
        cli.seed,
        cli.scheme.as_deref(),
        cli.settings.as_deref(),
    )?;
    cfg.validate()?;
    let start = Instant::now();
    let artifacts = match cli.command {
        Command::Chsh => cmd_chsh(&cfg)?,
        Command::Frames => cmd_frames(&cfg)?,
        Command::Evolve => cmd_evolve(&cfg)?,
        Command::Sample => cmd_sample(&cfg)?,
        Command::Collapse => cmd_collapse(&cfg)?,
    };
    let elapsed = start.elapsed();
    let written = artifacts.commit(&cfg.output)?;
    eprintln!("computed in {:.2} s, wrote {} file(s) to {}", elapsed.as_secs_f64(), written.len(), cfg.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

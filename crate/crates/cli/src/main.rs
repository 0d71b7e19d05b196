//! `vortex`: relax a vortex disc, measure its gyrotropic mode and compute its
//! coupling to a superconducting resonator.

// validation comparisons are written so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod manifest;
mod plot;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use manifest::Runner;
use stages::Ctx;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(vortex_cavity::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn is_validation(&self) -> bool {
        match self {
            CliError::Config(_) => true,
            CliError::Core(e) => e.is_validation(),
            CliError::Io(_) => false,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vortex", version, about = "Vortex gyration / superconducting resonator coupling pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "vortex-out")]
    out: PathBuf,
    /// section.key=value, repeatable.
    #[arg(long = "override", global = true)]
    overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use the short acceptance-scale trace length.
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Relax the configured disc into a vortex and write an OVF snapshot.
    Relax,
    /// Broadband spectrum of the relaxed state.
    Spectrum,
    /// f_G versus out-of-plane field for both polarities.
    SweepField,
    /// Zero-point field of the resonator at the disc.
    Rmsfield,
    /// Coupling strength and strong-coupling map over constriction widths.
    Couple,
    /// Transmission map across the avoided crossing.
    Transmit,
    /// relax, spectrum, susceptibility, rmsfield, couple and transmit.
    Pipeline,
    /// Material presets and their strong-coupling ratios.
    Materials,
    /// Print the resolved configuration.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.cmd {
        Cmd::Config => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Cmd::Materials => {
            print!("{}", stages::materials(&cfg, &cli.out)?);
            return Ok(());
        }
        _ => {}
    }
    let mut runner = Runner::new(&cli.out, cfg.to_toml())?;
    let ctx = Ctx { cfg, quick: cli.quick };
    let res = (|| -> Result<(), CliError> {
        match cli.cmd {
            Cmd::Relax => {
                stages::relax(&mut runner, &ctx)?;
            }
            Cmd::Spectrum => {
                stages::relax(&mut runner, &ctx)?;
                stages::spectrum(&mut runner, &ctx)?;
            }
            Cmd::SweepField => {
                stages::sweep(&mut runner, &ctx)?;
            }
            Cmd::Rmsfield => {
                stages::rmsfield(&mut runner, &ctx)?;
            }
            Cmd::Couple => {
                stages::couple(&mut runner, &ctx)?;
            }
            Cmd::Transmit => {
                stages::transmit(&mut runner, &ctx)?;
            }
            Cmd::Pipeline => {
                // keep going after a failure so later stages are recorded as skipped
                let mut first = None;
                for st in [
                    stages::relax,
                    stages::spectrum,
                    stages::susceptibility,
                    stages::rmsfield,
                    stages::couple,
                    stages::transmit,
                ] {
                    if let Err(e) = st(&mut runner, &ctx) {
                        first.get_or_insert(e);
                    }
                }
                if let Some(e) = first {
                    return Err(e);
                }
            }
            Cmd::Materials | Cmd::Config => unreachable!(),
        }
        Ok(())
    })();
    let path = runner.write_manifest()?;
    for st in &runner.stages {
        eprintln!("{:<15} {:?}", st.name, st.status);
        for w in &st.warnings {
            eprintln!("  warning: {w}");
        }
    }
    eprintln!("manifest: {}", path.display());
    res
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

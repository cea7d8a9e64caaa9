//! `phasered` command-line driver.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Format, RunConfig};
use output::Artifacts;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] phasered::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// Library errors that can only come from bad input values count as
    /// configuration errors.
    fn is_config(&self) -> bool {
        use phasered::Error as E;
        match self {
            CliError::Config(_) => true,
            CliError::Compute(e) => matches!(
                e,
                E::InvalidArgument(_) | E::UnknownModel(_) | E::MissingParam { .. } | E::DimensionMismatch { .. }
            ),
            CliError::Io(_) => false,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            _ if self.is_config() => "config",
            CliError::Io(_) => "io",
            _ => "computation",
        }
    }

    fn exit_code(&self) -> u8 {
        if self.is_config() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "phasered", version, about = "Phase reduction of limit-cycle oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized initial conditions (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Locate the limit cycle and write its phase grid.
    FindCycle,
    /// Compute isochrons at a set of phases.
    Isochrons,
    /// Compute the phase sensitivity function.
    Prc,
    /// Average a periodic forcing into a slow-phase coupling function.
    Reduce,
    /// Simulate a network in full and reduced form.
    Simulate,
    /// Locate the critical coupling of the detuned pair.
    Sweep,
    /// Fit the critical-coupling scaling law over several detunings.
    FitScaling,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::FindCycle => "find-cycle",
            Command::Isochrons => "isochrons",
            Command::Prc => "prc",
            Command::Reduce => "reduce",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::FitScaling => "fit-scaling",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("missing `--config PATH`".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let format = cli.format.or(cfg.format).unwrap_or_default();
    let dir = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Artifacts::new(&dir, format);
    match cli.command {
        Command::FindCycle => commands::find_cycle(&cfg, &mut out)?,
        Command::Isochrons => commands::isochrons(&cfg, &mut out)?,
        Command::Prc => commands::prc(&cfg, &mut out)?,
        Command::Reduce => commands::reduce(&cfg, &mut out)?,
        Command::Simulate => commands::simulate(&cfg, seed, &mut out)?,
        Command::Sweep => commands::sweep(&cfg, &mut out)?,
        Command::FitScaling => commands::fit_scaling(&cfg, &mut out)?,
    }
    out.finish(cli.command.name(), path, &text, seed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({
                "error": { "kind": e.kind(), "command": cli.command.name(), "message": e.to_string() }
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code())
        }
    }
}

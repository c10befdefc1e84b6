//! Library side of the `gradedchain` command-line tool: config parsing,
//! the subcommands and the deterministic JSON writer.
//!
//! Exit codes: 0 success; 1 a check failed, every Bethe seed failed, or a
//! numerical routine gave up; 2 configuration or usage error (including the
//! dimension cap).

pub mod commands;
pub mod config;
pub mod json;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use gradedchain::Error;
use serde_json::json;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::InvalidModel(_)
                | Error::InvalidChain(_)
                | Error::InvalidConfig(_)
                | Error::DimensionCap { .. }
                | Error::SiteOutOfRange { .. }
                | Error::UnsupportedConvention => 2,
                _ => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gradedchain", version, about = "Graded spin chains with multiplicity: checks, spectra, Bethe ansatz")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output JSON path (overrides [output].path; stdout when neither is set).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the command's tolerance: check thresholds, degeneracy
    /// window, or Newton tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Yang-Baxter, regularity, form, RTT and commutativity checks.
    Check {
        #[command(flatten)]
        common: Common,
        /// Perturb one R entry (negative control).
        #[arg(long, hide = true)]
        corrupt_r: bool,
    },
    /// Eigenvalues and degeneracies of H or τ(μ).
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the Bethe equations and compare with exact diagonalization.
    Bethe {
        #[command(flatten)]
        common: Common,
        /// Add k² quasi-random seeds.
        #[arg(long, value_name = "K")]
        seed_grid: Option<usize>,
    },
}

fn write_outputs(
    path: Option<&Path>,
    name: &str,
    outcome: &commands::Outcome,
    started: Instant,
) -> Result<(), CliError> {
    let payload = json::to_string(&outcome.document);
    let Some(path) = path else {
        print!("{payload}");
        return Ok(());
    };
    std::fs::write(path, payload)?;
    let meta = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "unix_time": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "success": outcome.success,
    });
    std::fs::write(path.with_extension("meta.json"), json::to_string(&meta))?;
    Ok(())
}

/// Runs one subcommand; `Ok(false)` means it completed but a check failed.
pub fn run(cli: Cli) -> Result<bool, CliError> {
    let started = Instant::now();
    let (name, common) = match &cli.command {
        Command::Check { common, .. } => ("check", common),
        Command::Spectrum { common } => ("spectrum", common),
        Command::Bethe { common, .. } => ("bethe", common),
    };
    if let Some(t) = common.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Config(format!("--tol must be positive and finite, got {t}")));
        }
    }
    let cfg = RunConfig::load(&common.config)?;
    let outcome = match &cli.command {
        Command::Check { corrupt_r, .. } => commands::check(&cfg, common.tol, *corrupt_r)?,
        Command::Spectrum { .. } => commands::spectrum(&cfg, common.tol)?,
        Command::Bethe { seed_grid, .. } => commands::bethe(&cfg, common.tol, *seed_grid)?,
    };
    let out = common.out.as_deref().or(cfg.output.path.as_deref());
    if name == "check" {
        for line in &outcome.summary {
            println!("{line}");
        }
        if out.is_none() {
            return Ok(outcome.success);
        }
    } else {
        for line in &outcome.summary {
            eprintln!("{line}");
        }
    }
    write_outputs(out, name, &outcome, started)?;
    Ok(outcome.success)
}

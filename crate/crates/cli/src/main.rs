use std::path::PathBuf;
use std::process::ExitCode;

use accv_cli::commands::{init, segment, verify};
use accv_cli::{configure_threads, CliError, Overrides, RunConfig};
use clap::{Parser, Subcommand};

/// Multi-phase Allen-Cahn Chan-Vese image segmentation.
#[derive(Parser)]
#[command(name = "seg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the edge masks and initial phase fields.
    Init(Invocation),
    /// Segment the input and write labels, contours, fields, energy and summary.
    Segment(Invocation),
    /// Check the bound principle, energy decay and the spectral multipliers.
    Verify(Invocation),
}

#[derive(clap::Args)]
struct Invocation {
    /// JSON run configuration.
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

impl Invocation {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::load(&self.config)?;
        config.apply(&self.overrides);
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Init(inv) => {
            for path in init(&inv.config()?)? {
                println!("{}", path.display());
            }
        }
        Command::Segment(inv) => {
            let outcome = segment(&inv.config()?)?;
            for path in &outcome.written {
                println!("{}", path.display());
            }
            if !outcome.converged {
                return Err(CliError::NotConverged(format!(
                    "labels still changing after {} outer iterations",
                    outcome.outer_iterations
                )));
            }
        }
        Command::Verify(inv) => {
            let checks = verify(&inv.config()?)?;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            let failed: Vec<_> = checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name)
                .collect();
            if !failed.is_empty() {
                return Err(CliError::Verify(format!("failed: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

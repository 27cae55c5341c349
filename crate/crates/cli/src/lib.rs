//! Command-line harness: builds spectra, runs counts, tallies, constants and
//! predictions, and writes CSV or JSON reports.

pub mod commands;
pub mod config;
pub mod report;

use config::{Cli, Command, ExperimentConfig};

/// Runs a parsed command line. `Ok(false)` means some requested check failed.
pub fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = ExperimentConfig::from_flags(cli.flags)?;
    match cli.command {
        Command::Constants => commands::constants(&cfg)?,
        Command::Count => commands::count(&cfg)?,
        Command::Moments => commands::moments(&cfg)?,
        Command::Verify { inject_fault } => return commands::verify(&cfg, inject_fault),
        Command::NormalOrder => commands::normal_order(&cfg)?,
        Command::Sweep { h_values } => commands::sweep(&cfg, &h_values)?,
    }
    Ok(true)
}

//! Command-line runner: synthetic data generation, cross-validated
//! evaluation, MESD and reporting.

pub mod checksum;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

pub use cli::{Cli, Command};
pub use config::RunConfig;
pub use error::{CliError, Result};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Report(a) => commands::report(a),
        Command::Mesd(a) => commands::mesd_cmd(a),
        Command::Inspect(a) => commands::inspect(a),
    }
}

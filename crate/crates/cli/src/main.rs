use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod manifest;

#[derive(Parser)]
#[command(name = "dauval", version, about = "Value a game publisher from daily-active-user histories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Directory for outputs; also the default location of inputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Flat `key = value` file, or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic catalog and financials with known ground truth.
    MakeFixture(commands::fixture::Opts),
    /// Fit power-law tails for the most popular games.
    FitTails(commands::fit_tails::Opts),
    /// Simulate future aggregate DAU scenarios.
    Simulate(commands::simulate::Opts),
    /// Fit revenue-per-user scenarios and value each DAU scenario.
    Value(commands::value::Opts),
    /// Summarize a valuation run.
    Report(commands::report::Opts),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MakeFixture(o) => commands::fixture::run(o),
        Command::FitTails(o) => commands::fit_tails::run(o),
        Command::Simulate(o) => commands::simulate::run(o),
        Command::Value(o) => commands::value::run(o),
        Command::Report(o) => commands::report::run(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

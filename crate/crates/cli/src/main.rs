//! `fpisa`: traces, pipeline validation, aggregation, query and analysis
//! runs over the switch floating-point model.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 validation failure,
//! 3 overwrite/overflow event under `--strict`.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{AggregateArgs, AnalyzeArgs, QueryArgs, ValidateArgs};
use crate::config::CommonArgs;

#[derive(Debug, Parser)]
#[command(name = "fpisa", version, about = "Floating-point addition on a match-action switch pipeline")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Add two decimal literals through the pipeline, printing every stage
    Add {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
    },
    /// Check a stage program against an ALU profile
    Validate(ValidateArgs),
    /// Aggregate worker vectors in the switch
    Aggregate(AggregateArgs),
    /// Run a pruning or group-by query over `key,value` rows
    Query(QueryArgs),
    /// Ratio or error histograms over worker vectors
    Analyze(AnalyzeArgs),
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_STRICT: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Add { a, b } => commands::add(&cli.common, a, b),
        Command::Validate(args) => commands::validate(&cli.common, args),
        Command::Aggregate(args) => commands::aggregate(&cli.common, args),
        Command::Query(args) => commands::query(&cli.common, args),
        Command::Analyze(args) => commands::analyze(&cli.common, args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code_for(&e))
        }
    }
}

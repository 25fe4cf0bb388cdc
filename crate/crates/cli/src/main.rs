//! `mapf`: solve, benchmark, validate and plot.
//!
//! Exit codes: 0 ok, 1 invalid solution, 2 timeout, 3 no solution,
//! 64 usage error, 65 unreadable or malformed input, 70 internal error.

mod args;
mod commands;
mod run;
mod solution_file;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_TIMEOUT: u8 = 2;
pub const EXIT_NO_SOLUTION: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_INTERNAL: u8 = 70;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Bench(a) => commands::bench(a),
        Command::Validate(a) => commands::validate(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}

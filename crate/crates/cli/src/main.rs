//! `lass0` command-line tool.
//!
//! Exit codes: 0 success, 1 bad input, 2 internal failure, 3 a property
//! check failed.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Command, FileConfig};

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Internal(String),
}

impl From<lass0::Error> for Failure {
    fn from(e: lass0::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

fn run(cli: &Cli) -> Result<commands::Output, Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Fit(a) => commands::fit(a, &file),
        Command::Synth(a) => commands::synth(a, &file),
        Command::Recover(a) => commands::recover(a, &file),
        Command::Bench(a) => commands::bench(a, &file),
        Command::OracleCheck(a) => commands::oracle_check(a, &file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match std::panic::catch_unwind(|| run(&cli)) {
        Ok(r) => r,
        Err(_) => return ExitCode::from(2),
    };
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.body.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            match out.property_failure {
                None => ExitCode::SUCCESS,
                Some(msg) => {
                    eprintln!("property check failed:\n{msg}");
                    ExitCode::from(3)
                }
            }
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

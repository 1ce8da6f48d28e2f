//! `sphchaos` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 domain error, 3 undefined
//! quantity, 4 grid resolution too low.

mod args;
mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn domain(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn io(e: std::io::Error, what: &std::path::Path) -> Self {
        Self { code: 1, message: format!("{}: {e}", what.display()) }
    }
}

impl From<sphchaos::Error> for CliError {
    fn from(e: sphchaos::Error) -> Self {
        let code = match &e {
            sphchaos::Error::Domain(_) | sphchaos::Error::Json(_) => 2,
            sphchaos::Error::Undefined(_) => 3,
            sphchaos::Error::Resolution { .. } => 4,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

fn run() -> Result<(), CliError> {
    let argv = config::expand_argv(std::env::args_os().collect())?;
    let cli = Cli::parse_from(argv);
    commands::execute(cli.command)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sphchaos: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

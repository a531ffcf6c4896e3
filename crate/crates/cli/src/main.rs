mod args;
mod config;
mod eval;
mod generate;
mod inputs;
mod oracle;
mod record;
mod solve;
mod train;

use std::fmt;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Errors that map to a specific exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Timeout(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Timeout(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Failure>() {
        Some(Failure::Usage(_)) => EXIT_USAGE,
        Some(Failure::Timeout(_)) => EXIT_TIMEOUT,
        None => EXIT_IO,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    if g.time_limit.is_nan() || g.time_limit <= 0.0 {
        anyhow::bail!(Failure::usage("--time-limit must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(g.threads).build()?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => generate::run(g, a),
        Command::Solve(a) => solve::run(g, a),
        Command::Train(a) => train::run(g, a),
        Command::Eval(a) => eval::run(a),
        Command::Oracle(a) => oracle::run(a),
    })
}

fn main() -> ExitCode {
    let argv = match config::merge(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

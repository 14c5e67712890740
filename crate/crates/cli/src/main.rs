//! `qpopf`: the offline/online critical-region POPF pipeline from the command line.

mod args;
mod artifact;
mod commands;
mod config;

use args::{Cli, Command};
use clap::Parser;
use std::process::ExitCode;

/// Usage errors exit with 2, runtime failures with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = config::FileConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(file.threads) {
        config::at_least_one("threads", n)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.into()))?;
    }
    let ctx = commands::Ctx {
        out_dir: config::out_dir(cli.out_dir, &file),
        file,
    };
    match cli.command {
        Command::Regions(a) => commands::regions(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Audit(a) => commands::audit(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Sweep(a) => commands::sweep_cmd(&ctx, a),
        Command::Budget(a) => commands::budget(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

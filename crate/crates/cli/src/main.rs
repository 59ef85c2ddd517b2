mod args;
mod commands;
mod pipeline;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use eegtile::{Error, ErrorKind};

use args::{Cli, Command};

const THREADS_ENV: &str = "EEGTILE_THREADS";

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        ),
        Err(_) => flag,
    };
    match threads {
        None => Ok(()),
        Some(0) => Err(Error::InvalidArgument("thread count must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} threads: {e}")).into()),
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Prepare(a) => commands::prepare(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Permtest(a) => commands::permtest(a),
        Command::Mds(a) => commands::mds(a),
    }
}

fn exit_code(kind: Option<ErrorKind>) -> u8 {
    match kind {
        Some(ErrorKind::Usage) => 2,
        Some(ErrorKind::Numeric) => 4,
        Some(ErrorKind::Data) | None => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let typed = err.downcast_ref::<Error>();
            eprintln!("error[{}]: {err:#}", typed.map_or("Error", Error::name));
            ExitCode::from(exit_code(typed.map(Error::kind)))
        }
    }
}

//! `dirms`: directional density estimation and mean-shift clustering from the
//! command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 partial convergence,
//! 3 input or usage error. `DIRMS_THREADS` caps the worker pool.

mod args;
mod cluster;
mod density;
mod ingest;
mod report;
mod simulate;
mod verify;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerifyFailed,
    PartialConvergence,
}

const EXIT_INPUT: u8 = 3;

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("DIRMS_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow::anyhow!("DIRMS_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Cluster(a) => cluster::run(a),
        Command::Density(a) => density::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Verify(a) => verify::run(a),
    });
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerifyFailed) => ExitCode::from(1),
        Ok(Status::PartialConvergence) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

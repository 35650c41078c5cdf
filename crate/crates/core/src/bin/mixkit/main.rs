//! `mixkit`: dataset generation, assignment benchmark, evaluation,
//! optimization and weight sweeps.

mod commands;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = commands::Cli::parse();
    if let Err(e) = commands::configure_threads() {
        eprintln!("mixkit: {e}");
        return ExitCode::FAILURE;
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mixkit: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use ptsync_cli::Cli;

fn main() -> ExitCode {
    ExitCode::from(ptsync_cli::main_with(&Cli::parse()))
}

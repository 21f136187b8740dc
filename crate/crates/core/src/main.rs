use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    robustlin::expcli::run_cli(robustlin::expcli::Cli::parse())
}

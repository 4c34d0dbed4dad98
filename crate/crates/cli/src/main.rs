use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    mia_cli::run(mia_cli::Cli::parse())
}

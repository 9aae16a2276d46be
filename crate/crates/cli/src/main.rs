use std::process::ExitCode;

use clap::Parser;
use ssr_lab::args::Cli;

fn main() -> ExitCode {
    ssr_lab::run(Cli::parse())
}

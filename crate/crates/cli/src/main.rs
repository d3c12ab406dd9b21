use std::process::ExitCode;

use clap::Parser;
use instflow_cli::{run, Cli};
use log::LevelFilter;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { LevelFilter::Warn } else { LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

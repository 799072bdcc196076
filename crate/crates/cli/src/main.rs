mod config;
mod error;
mod expr;
mod metric;
mod run;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    // clap itself exits with 2 on malformed flags
    let cli = config::Cli::parse();
    match run::run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qtower: {e}");
            ExitCode::from(2)
        }
    }
}

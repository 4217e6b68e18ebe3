mod args;
mod config;
mod error;
mod levels;
mod manifest;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => run::gen::run(a),
        Command::Calibrate(a) => run::calibrate::run(a),
        Command::Map(a) => run::map::run(a),
        Command::Analyze(a) => run::analyze::run(a),
        Command::Pipeline(a) => run::pipeline::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("noisecal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

mod args;
mod config;
mod exit;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use exit::CliError;

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => run::synth(a),
        Command::Train(a) => run::fit_and_report(&config::resolve_train(a)?),
        Command::Eval(a) => run::eval(a),
        Command::Compare(a) => run::fit_and_report(&config::resolve_compare(a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rmen-cca: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => return usage_error(&msg),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let data = match &cli.command {
        Command::Train(c) => Some(&c.data),
        Command::Prune(c) => Some(&c.data),
        Command::Rewire(c) => Some(&c.data),
        Command::Spectra(c) => Some(&c.data),
        Command::Consensus(_) => None,
    };
    if let Some(Err(msg)) = data.map(commands::require_data) {
        return usage_error(&msg);
    }
    log::debug!(
        "writing artifacts to {}",
        cli.command.common().out.display()
    );
    let result = match &cli.command {
        Command::Train(c) => commands::run_train(c),
        Command::Prune(c) => commands::run_prune(c),
        Command::Rewire(c) => commands::run_rewire(c),
        Command::Consensus(c) => commands::run_consensus(c),
        Command::Spectra(c) => commands::run_spectra(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

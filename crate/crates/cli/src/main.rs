mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use commands::Failure;
use config::ConfigError;

const SUBCOMMANDS: [&str; 5] = ["gen", "solve", "sweep", "table1", "eps-search"];

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n");
    eprintln!("{}", Cli::command().render_usage());
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args_os().collect(), &SUBCOMMANDS) {
        Ok(v) => v,
        Err(ConfigError::Syntax(msg)) => return usage_error(&msg),
        Err(ConfigError::Read(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    init_logging(&cli);

    if cli.show_defaults {
        print!("{}", commands::defaults_text());
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        return usage_error("a subcommand is required");
    };
    let result = match command {
        Command::Gen(a) => commands::gen(a),
        Command::Solve(a) => commands::solve(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Table1(a) => commands::table1(a),
        Command::EpsSearch(a) => commands::eps_search(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => usage_error(&msg),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

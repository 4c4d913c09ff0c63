use std::process::ExitCode;

use clap::Parser;
use shm_locate::cli::{dispatch, Cli};

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let common = cli.command.common();
    let level = if common.quiet {
        log::LevelFilter::Error
    } else if common.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new().filter_level(level).init();

    match dispatch(&cli.command) {
        Ok(text) => {
            if !common.quiet {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `fcvi` command-line tool.
//!
//! Exit codes: 0 success, 1 verification or benchmark failure, 2 usage
//! error, 3 I/O or file-format error.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Errors the user can fix by changing flags or config.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<fcvi::Error>() {
            use fcvi::Error::*;
            return match e {
                Io(_) | BadMagic(_) | UnsupportedVersion(_) | ChecksumMismatch { .. } | Truncated(_)
                | Malformed(_) | Parse { .. } | Json(_) => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a, config),
        Command::Build(a) => commands::build(a, config),
        Command::Info(a) => commands::info(a, config),
        Command::Query(a) => commands::query(a, config),
        Command::Bench(a) => commands::bench(a, config),
        Command::Verify(a) => commands::verify(a, config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

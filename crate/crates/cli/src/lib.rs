//! File formats and the `sinkbss` command-line front end.

pub mod audio_io;
pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

pub use commands::{Cli, CliError};

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code: 0 on success, 1 on runtime failure,
/// 2 on usage or configuration errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

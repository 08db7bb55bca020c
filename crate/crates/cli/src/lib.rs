//! `offnadir` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Results
//! go to the files named by flags or to standard output; diagnostics go to
//! standard error.

mod args;
mod commands;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.map_or(0, usize::from))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_DATA;
        }
    };
    match pool.install(|| commands::dispatch(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            EXIT_DATA
        }
    }
}

/// Error chain joined by `: `, skipping causes the previous message already
/// spells out.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
        prev = msg;
    }
    text
}

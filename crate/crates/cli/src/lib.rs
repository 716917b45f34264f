//! The `unmix` command-line tool: argument parsing, command implementations
//! and on-disk artifact layouts. The binary is a thin wrapper over [`run`].

mod args;
mod artifacts;
mod commands;
mod failure;

use std::ffi::OsString;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::Parser;

use args::{Cli, Command};
pub use failure::{EXPERIMENT, USAGE};

static QUIET: AtomicBool = AtomicBool::new(false);

/// Suppresses the human-readable stdout/stderr summaries; files are
/// written as usual.
pub fn set_quiet(quiet: bool) {
    QUIET.store(quiet, Ordering::Relaxed);
}

fn quiet() -> bool {
    QUIET.load(Ordering::Relaxed)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 success, 1 experiment failure,
/// 2 usage or configuration error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            if !quiet() {
                let _ = e.print();
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::EstimateP(a) => commands::cmd_estimate_p(a),
        Command::Unmix(a) => commands::cmd_unmix(a),
        Command::Evaluate(a) => commands::cmd_evaluate(a),
        Command::Pipeline(a) => commands::cmd_pipeline(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            if !quiet() {
                eprintln!("unmix: {f}");
            }
            f.code
        }
    }
}

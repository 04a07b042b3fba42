//! Library side of the `coherence` command-line tool.
//!
//! [`run`] parses arguments and executes one command against caller-supplied
//! output streams, which keeps the whole tool testable in-process.
//!
//! Exit codes: 0 success, 1 property failure (or violation found by
//! `verify`), 2 usage or validation error, 3 search budget exhausted.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod output;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::Path;

use clap::Parser;

use args::{Cli, Command};

/// How a command finished when it did not hit an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
    Exhausted,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Failure => 1,
            Outcome::Exhausted => 3,
        }
    }
}

/// Any error that aborts a command; all of them map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] tsallis_coherence::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("output: {0}")]
    Output(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Runs the tool with `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Compute(a) => commands::compute(a, stdout),
        Command::Sweep(a) => commands::sweep(a, stdout),
        Command::Verify(a) => commands::verify(a, stdout, stderr),
        Command::SearchViolation(a) => commands::search(a, stdout, stderr),
        Command::OracleCompare(a) => commands::oracle_compare(a, stdout, stderr),
    };
    match result {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

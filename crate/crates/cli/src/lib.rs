//! Command-line front end: argument parsing, CSV input and reports.

pub mod args;
pub mod commands;
pub mod data;
pub mod error;
pub mod report;
pub mod weights;

use std::io::Write;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::Progress;
use crate::error::{exit, CliError, CliResult};
use crate::report::ReportRecord;

/// Runs one invocation and returns the report without printing it.
pub fn execute(cli: &Cli, argv: &[String]) -> CliResult<ReportRecord> {
    let progress = Progress { quiet: cli.quiet };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cli.threads)))?;
    pool.install(|| match &cli.command {
        Command::Test(a) => {
            let record = commands::test(a, argv, progress)?;
            if let Some(path) = &a.json {
                record.write_to(path)?;
            }
            Ok(record)
        }
        Command::Critvals(a) => commands::critvals(a, argv, progress),
        Command::Power(a) => commands::power(a, argv, progress),
        Command::Coverage(a) => commands::coverage(a, argv, progress),
        Command::Delta(a) => commands::delta(a, argv, progress),
    })
}

/// Full entry point: parses `argv`, prints the JSON report to standard
/// output and returns the process exit status.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, &argv) {
        Ok(record) => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{}", record.to_json()).and_then(|_| out.flush()) {
                Ok(()) => exit::OK,
                // a closed pipe (e.g. `| head`) is not worth a message
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => exit::IO,
                Err(e) => {
                    eprintln!("cfnorm: cannot write report: {e}");
                    exit::IO
                }
            }
        }
        Err(e) => {
            eprintln!("cfnorm: {e}");
            e.exit_code()
        }
    }
}

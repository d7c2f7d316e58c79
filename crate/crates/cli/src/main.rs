//! `lifshitz` command-line tool.
//!
//! Reports go to standard output as JSON (or CSV for sweeps). Errors go to
//! standard error as a single JSON line; exit status 2 means invalid input,
//! 3 means a computation did not converge or a check failed.

mod config;
mod error;
mod run;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use config::{Cli, RunConfig};
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ").to_string();
            return fail(&CliError::validation(first));
        }
    };
    let cfg = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match run::run(&cfg) {
        Ok(out) => {
            if cfg.verbose {
                eprintln!("{}", out.summary);
            }
            let mut stdout = std::io::stdout().lock();
            // one write so the report appears atomically
            let _ = stdout.write_all(format!("{}\n", out.text).as_bytes());
            let _ = stdout.flush();
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

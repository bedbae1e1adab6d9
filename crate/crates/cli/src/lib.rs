//! Command-line front end for `thirdsound-core`.
//!
//! Every invocation writes its outputs plus a `<subcommand>.manifest.json`
//! into `--out`. Failures print one JSON object on stderr and exit nonzero:
//!
//! | code | meaning |
//! |------|---------|
//! | 2 | usage error (unknown flag, bad value) |
//! | 3 | invalid configuration or parameters |
//! | 4 | file I/O failure |
//! | 5 | numerical failure (fit, instability) |
//! | 6 | a `repro` check failed (outputs are still written) |
//! | 7 | `rerun` outputs differ from the manifest |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod error;
pub mod input;
pub mod manifest;
pub mod output;
pub mod repro;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use error::{CliError, ErrorKind};
pub use manifest::RunManifest;

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(
                e.kind(),
                K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return 0;
            }
            let err = CliError::new(ErrorKind::Usage, e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    let recorded: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(&cli, recorded, None) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

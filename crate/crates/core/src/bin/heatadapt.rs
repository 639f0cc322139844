use std::process::ExitCode;

use clap::Parser;
use heatadapt::cli::{self, Cli, CliError, EXIT_FAILURE, EXIT_USAGE};

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match cli::run(parsed).map_err(anyhow::Error::from) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(EXIT_FAILURE, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

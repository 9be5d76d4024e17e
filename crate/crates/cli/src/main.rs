mod args;
mod commands;
mod error;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let ctx = Ctx::from_args(&cli.global)?;
    let report = match cli.command {
        Command::Pvalue {
            counts,
            margin,
            method,
        } => commands::pvalue(&ctx, counts, margin, method),
        Command::Stat { counts, at, margin } => commands::stat(&ctx, counts, at, margin),
        Command::Ci {
            counts,
            method,
            alpha,
            margin,
        } => commands::ci(&ctx, counts, method, alpha, margin),
        Command::Diagnose { scan } => commands::diagnose(&ctx, scan),
        Command::Coverage {
            design,
            method,
            alpha,
            margin,
            step,
            components,
        } => commands::coverage(&ctx, design, method, alpha, margin, step, components),
        Command::Compare {
            counts,
            alpha,
            margin,
        } => commands::compare(&ctx, counts, alpha, margin),
    }?;
    report::emit(&report, cli.global.format, cli.global.output.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riskdiff: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

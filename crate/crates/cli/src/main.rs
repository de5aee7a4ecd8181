mod cli;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use cli::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version go to stdout and succeed; usage errors fail
            // with 1 so that 2 keeps meaning "inconclusive".
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = commands::run(&cli.command, &cli.common)
        .and_then(|(rendered, status)| output::emit(&cli.common, &rendered).map(|()| status));
    match outcome {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use purity_cli::cli::Cli;
use purity_cli::commands::{self, EXIT_ERROR};
use purity_cli::numfmt::to_json_string;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let outcome = commands::run(&cli.command)?;
    let json = to_json_string(&outcome.report)?;
    match &cli.out {
        Some(path) => std::fs::write(path, json)?,
        None => std::io::stdout().lock().write_all(json.as_bytes())?,
    }
    if !cli.quiet {
        for line in &outcome.summary {
            eprintln!("{line}");
        }
        for w in &outcome.report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(outcome.report.exit_code)
}

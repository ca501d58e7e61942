use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use weakkam_cli::{run, write_outputs, CliError, Command, RunConfig};

/// Discrete weak KAM solver.
#[derive(Parser, Debug)]
#[command(name = "weakkam", version)]
struct Args {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the invariant checks only: print the report, write no files.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(passed) => ExitCode::from(if passed { 0 } else { 1 }),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Read {
        path: args.config.display().to_string(),
        source,
    })?;
    let config = RunConfig::from_json(&text)?;
    let mut outcome = run(&config, args.command)?;
    if !args.check {
        let dir = args
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        write_outputs(&dir, &outcome.files, &mut outcome.report)?;
    }
    print!("{}", outcome.report.to_json());
    for c in outcome.report.invariants.iter().filter(|c| !c.passed) {
        eprintln!("invariant failed: {}", c.name);
    }
    if let Some(e) = &outcome.report.error {
        eprintln!("solver error: {e}");
    }
    Ok(outcome.report.passed)
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use peel_cli::presets::{preset, PRESETS};
use peel_cli::verify::{verify, Fault};
use peel_cli::{parse_config, run_experiment, CliError};

#[derive(Parser)]
#[command(name = "peel", version, about = "Unconstrained-feature dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Run a built-in figure preset.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Run the invariant suites and print a JSON report.
    Verify {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, svg } => {
            let text = fs::read_to_string(&config).map_err(|e| CliError::Io(format!("{}: {e}", config.display())))?;
            let cfg = parse_config(&text)?;
            let report = run_experiment(&cfg, out.as_deref(), svg)?;
            println!("wrote {} run(s) to {}", report.members.len(), report.out_dir.display());
            Ok(())
        }
        Command::Preset { name, out, svg } => {
            let text = preset(&name).ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                CliError::Config(format!("unknown preset \"{name}\"; expected one of {}", names.join(", ")))
            })?;
            let cfg = parse_config(text)?;
            let report = run_experiment(&cfg, out.as_deref(), svg)?;
            println!("wrote {} run(s) to {}", report.members.len(), report.out_dir.display());
            Ok(())
        }
        Command::Verify { suite, seed, inject_fault } => {
            let fault = match inject_fault.as_deref() {
                None => None,
                Some(name) => Some(Fault::parse(name).ok_or_else(|| CliError::Config(format!("unknown fault \"{name}\"")))?),
            };
            let report = verify(suite.as_deref(), seed, fault)?;
            let text = serde_json::to_string_pretty(&report.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
            println!("{text}");
            if report.passed() {
                Ok(())
            } else {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
                Err(CliError::Verify(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("peel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

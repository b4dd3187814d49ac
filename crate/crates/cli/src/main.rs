use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use slipflow_cli::{load_config, run, Command, Status};

/// Steady slip-channel flow: carrier checks, solves and diagnostics.
#[derive(Parser, Debug)]
#[command(name = "slipflow", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (sectioned key = value).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `run.output`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Validate and print the resolved configuration without running.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(Status::Validation.code() as u8);
        }
    };
    if cli.check {
        print!("{}", config.to_toml());
        return ExitCode::SUCCESS;
    }
    if let Some(w) = &config.cutoffs.policy_warning {
        eprintln!("warning: {w}");
    }
    match run(cli.command, &config, cli.out.as_deref()) {
        Ok(outcome) => {
            for m in &outcome.messages {
                eprintln!("{}: {m}", outcome.status.name());
            }
            for a in &outcome.artifacts {
                println!("{}", a.display());
            }
            ExitCode::from(outcome.status.code() as u8)
        }
        Err(e) => {
            eprintln!("cannot write outputs: {e}");
            ExitCode::from(Status::Numerical.code() as u8)
        }
    }
}

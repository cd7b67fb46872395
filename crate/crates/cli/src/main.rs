use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kfpness_cli::commands::{write_config_failure, Command, EXIT_INVALID};
use kfpness_cli::{parse_config, run_command};

/// Kinetic Fokker-Planck solver and steady-state experiments.
#[derive(Parser)]
#[command(name = "kfpness", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a configuration without running anything.
    Validate(Args),
    /// Time-integrate from the configured initial Maxwellian.
    Simulate(Args),
    /// Steady state of the linear problem.
    LinearNess(Args),
    /// Self-consistent steady state by fixed-point iteration.
    Ness(Args),
    /// Relaxation of a perturbed steady state.
    Stability(Args),
    /// Compare against the homogeneous closed forms.
    OracleCheck(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::LinearNess(a) => (Command::LinearNess, a),
        Cmd::Ness(a) => (Command::Ness, a),
        Cmd::Stability(a) => (Command::Stability, a),
        Cmd::OracleCheck(a) => (Command::OracleCheck, a),
    };
    let setup = match parse_config(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            if let (Some(dir), false) = (&args.out, command == Command::Validate) {
                if let Err(io) = write_config_failure(command, &e, dir) {
                    eprintln!("error: {}: {io}", dir.display());
                }
            }
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    let outcome = run_command(command, &setup, args.out.as_deref());
    let status = outcome.summary["status"].as_str().unwrap_or("");
    match outcome.reason() {
        Some(r) => eprintln!(
            "{}: {status} ({r}): {}",
            command.name(),
            outcome.summary["message"].as_str().unwrap_or("")
        ),
        None => eprintln!("{}: {status}", command.name()),
    }
    for p in &outcome.written {
        println!("{}", p.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}

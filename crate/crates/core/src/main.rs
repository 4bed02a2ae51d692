use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pxell::config::{parse_config, Mode};
use pxell::run::{execute, write_artifacts};

/// Solver and verification harness for singular quasilinear elliptic
/// systems with variable exponents.
#[derive(Parser)]
#[command(name = "pxell", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the plain-text run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for fields.csv, report.json and trace.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the grid resolution from the configuration.
    #[arg(long)]
    resolution_override: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the configuration and run the hypothesis validators only.
    Validate(Common),
    /// Solve one Dirichlet problem with the configured constant source.
    SolveSingle(Common),
    /// Run the cooperative-system fixed-point pipeline.
    SolveCooperative(Common),
    /// Run the competitive-system order-interval pipeline.
    SolveCompetitive(Common),
    /// Run the cooperative pipeline and the full chain-bound verification.
    VerifyMoser(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match &cli.command {
        Command::Validate(c) => (Mode::Validate, c),
        Command::SolveSingle(c) => (Mode::Single, c),
        Command::SolveCooperative(c) => (Mode::Cooperative, c),
        Command::SolveCompetitive(c) => (Mode::Competitive, c),
        Command::VerifyMoser(c) => (Mode::VerifyMoser, c),
    };

    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return ExitCode::from(1);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let outcome = match execute(&cfg, mode, common.resolution_override) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(out_dir) = &common.out {
        if let Err(e) = write_artifacts(&outcome, out_dir) {
            eprintln!("error: failed to write artifacts: {e}");
            return ExitCode::from(1);
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome.report).expect("report serializes")
    );
    ExitCode::from(u8::try_from(outcome.exit_code).unwrap_or(1))
}

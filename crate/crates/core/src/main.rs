use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curvebody::cli::{self, Command, Flags};

#[derive(Parser)]
#[command(name = "curvebody", version, about = "Rotopulsating orbits of the curved n-body problem")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the existence criterion on a rho grid.
    Check(Common),
    /// Integrate the reduced (rho, theta, Z) system.
    SimulateReduced(Common),
    /// Integrate the full equations of motion from the embedded initial data.
    SimulateFull(Common),
    /// Compare the embedded reduced solution with the full integration.
    CrossValidate(Common),
    /// Run a batch of criterion checks.
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even when the configuration fails the criterion.
    #[arg(long)]
    force: bool,
    /// Recompute every b_i at each step and stop if they disagree.
    #[arg(long)]
    strict_b: bool,
    /// Rescale positions back onto the manifold after every step.
    #[arg(long)]
    project: bool,
}

fn main() -> ExitCode {
    let (command, args) = match Cli::parse().command {
        Cmd::Check(a) => (Command::Check, a),
        Cmd::SimulateReduced(a) => (Command::SimulateReduced, a),
        Cmd::SimulateFull(a) => (Command::SimulateFull, a),
        Cmd::CrossValidate(a) => (Command::CrossValidate, a),
        Cmd::Scan(a) => (Command::Scan, a),
    };
    let flags = Flags { out: args.out, force: args.force, strict_b: args.strict_b, project: args.project };
    ExitCode::from(cli::run(command, &args.config, &flags) as u8)
}

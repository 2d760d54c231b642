//! `rpf`: batch runs over the rpf-core library. Every command reads a JSON
//! spec, prints a JSON result on stdout and, with `--out`, writes its tables
//! and a run manifest to a directory.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rpf",
    version,
    about = "Random performance contest success functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON input file.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Directory for CSV tables and the run manifest.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the spec (axioms, simulate).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the violation tolerance (axioms).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Overwrite existing files in the output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Market-clearing cutoff s(p) for {family, p, k}.
    Cutoff(Common),
    /// Audit a success function against the characterizing axioms.
    Axioms(Common),
    /// Symmetric equilibrium effort, second-order check and verification.
    Equilibrium(Common),
    /// The curves (1/k) f(F^{-1}(1-k)) for normal, t(3) and t(1) noise.
    Figure1(Common),
    /// Equilibrium effort against the winner fraction for a fixed purse.
    Design(Common),
    /// Ratio of effort costs to rents and the break-even prize.
    Dissipation(Common),
    /// Finite-population simulation against the model.
    Simulate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Cutoff(c) => ("cutoff", c),
        Command::Axioms(c) => ("axioms", c),
        Command::Equilibrium(c) => ("equilibrium", c),
        Command::Figure1(c) => ("figure1", c),
        Command::Design(c) => ("design", c),
        Command::Dissipation(c) => ("dissipation", c),
        Command::Simulate(c) => ("simulate", c),
    };
    let result = match &cli.command {
        Command::Cutoff(c) => commands::cutoff(c),
        Command::Axioms(c) => commands::axioms(c),
        Command::Equilibrium(c) => commands::equilibrium(c),
        Command::Figure1(c) => commands::figure1(c),
        Command::Design(c) => commands::design(c),
        Command::Dissipation(c) => commands::dissipation(c),
        Command::Simulate(c) => commands::simulate(c),
    };
    match result.and_then(|outcome| output::emit(name, common, outcome)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rpf {name}: {e}");
            ExitCode::from(e.code())
        }
    }
}

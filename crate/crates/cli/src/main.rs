//! `devchain`: analyze, draw, simulate and optimize deviation chains of
//! finite games.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when a numerical
//! procedure did not converge (reports are still written).

mod commands;
mod input;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, GraphArgs, OptimizeArgs, SimulateArgs, Status};

#[derive(Parser, Debug)]
#[command(name = "devchain", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structure, stationary laws, Cesàro limit and average payoffs.
    Analyze(AnalyzeArgs),
    /// Transition graph in DOT format.
    Graph(GraphArgs),
    /// Monte Carlo occupation frequencies.
    Simulate(SimulateArgs),
    /// Best policy for one player against fixed opponents.
    Optimize(OptimizeArgs),
}

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<devchain::Error>(),
            Some(devchain::Error::Singular { .. })
        )
    });
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_INPUT
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Analyze(args) => commands::analyze(args),
        Command::Graph(args) => commands::graph(args),
        Command::Simulate(args) => commands::simulate_cmd(args),
        Command::Optimize(args) => commands::optimize_cmd(args),
    };
    match outcome {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(EXIT_NUMERIC),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

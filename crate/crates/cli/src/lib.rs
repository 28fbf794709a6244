//! Experiment runner for the plap toolkit.
//!
//! Every subcommand takes its parameters from flags, an optional `--config`
//! file (TOML or JSON, same keys as the long flags with `_` for `-`), or the
//! built-in defaults, in that order of precedence. Parameters are validated
//! before anything is computed.
//!
//! Exit codes: 0 on success, 1 on numerical failure or non-convergence (the
//! diagnostics JSON is still written), 2 on configuration errors (nothing is
//! written).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod output;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "plap", version, about = "Degenerate p-Poisson laboratory on planar grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the exponent chain over a range of p.
    Exponents(commands::exponents::ExponentsArgs),
    /// Solve the regularized p-Poisson problem and write the nodal solution.
    Solve(commands::solve::SolveArgs),
    /// Oscillation profile of a solution around a lattice node.
    Oscillate(commands::oscillate::OscillateArgs),
    /// Quasiregularity checks on the complex gradient of a solution.
    Qr(commands::qr::QrArgs),
    /// Apply one of the normalizing rescalings to a solution.
    Rescale(commands::rescale::RescaleArgs),
    /// Sweep the source size and measure the p-harmonic corrector.
    Corrector(commands::corrector::CorrectorArgs),
    /// Refinement study of the radial benchmark.
    Convergence(commands::convergence::ConvergenceArgs),
}

impl Command {
    pub fn execute(self) -> CliResult<()> {
        match self {
            Command::Exponents(a) => commands::exponents::run(a),
            Command::Solve(a) => commands::solve::run(a),
            Command::Oscillate(a) => commands::oscillate::run(a),
            Command::Qr(a) => commands::qr::run(a),
            Command::Rescale(a) => commands::rescale::run(a),
            Command::Corrector(a) => commands::corrector::run(a),
            Command::Convergence(a) => commands::convergence::run(a),
        }
    }
}

/// Parses `argv` (program name first), runs the experiment and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command.execute() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub mod convergence;
pub mod corrector;
pub mod exponents;
pub mod oscillate;
pub mod qr;
pub mod rescale;
pub mod solve;

use std::path::Path;

use clap::Args;
use plap_core::grid::{Domain, Grid};
use plap_core::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::config::{finite, LatticePoint};
use crate::error::{CliError, CliResult};
use crate::output::{write_failure, Meta};

/// Continuation and Newton settings; a `[solver]` table in config files.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverArgs {
    /// Initial regularization level.
    #[arg(long, value_parser = finite)]
    pub eps0: Option<f64>,
    /// Final regularization level.
    #[arg(long, value_parser = finite)]
    pub eps_min: Option<f64>,
    /// Factor between consecutive regularization levels.
    #[arg(long, value_parser = finite)]
    pub eps_factor: Option<f64>,
    /// Sup-norm residual target (default 1e-9 (|f|_inf + 1)).
    #[arg(long, value_parser = finite)]
    pub newton_tol: Option<f64>,
    /// Newton iterations allowed per level.
    #[arg(long)]
    pub max_newton: Option<usize>,
}

impl SolverArgs {
    pub fn resolve(&self) -> CliResult<SolverConfig> {
        let mut c = SolverConfig::default();
        if let Some(v) = self.eps0 {
            c.eps0 = v;
        }
        if let Some(v) = self.eps_min {
            c.eps_min = v;
        }
        if let Some(v) = self.eps_factor {
            c.eps_factor = v;
        }
        if self.newton_tol.is_some() {
            c.newton_tol = self.newton_tol;
        }
        if let Some(v) = self.max_newton {
            c.max_newton = v;
        }
        match c.validate() {
            Ok(()) => Ok(c),
            Err(plap_core::Error::Config(m)) => Err(CliError::Config(format!("solver.{m}"))),
            Err(e) => Err(e.into()),
        }
    }
}

pub fn parse_domain(s: &str) -> CliResult<Domain> {
    s.parse().map_err(|_| CliError::config("domain", format!("expected `square` or `disk`, got `{s}`")))
}

/// Node index of a lattice position, or the origin when none is given.
pub fn base_node(grid: &Grid, x0: Option<LatticePoint>) -> CliResult<usize> {
    match x0 {
        None => Ok(grid.origin()),
        Some(LatticePoint(i, j)) => grid
            .node_at(i, j)
            .map_err(|e| CliError::config("x0", e)),
    }
}

/// Writes failure diagnostics when a validated computation breaks down.
pub fn guard<T>(result: CliResult<T>, sidecar: &Path, meta: &Meta) -> CliResult<T> {
    match result {
        Err(e @ CliError::Numerical(_)) => {
            write_failure(sidecar, meta, &e)?;
            Err(e)
        }
        other => other,
    }
}

/// The `p` of a command that reads a solution: the flag, else the file's `p` entry.
pub fn p_from(flag: Option<f64>, meta_p: Option<&str>) -> CliResult<f64> {
    match (flag, meta_p) {
        (Some(p), _) => Ok(p),
        (None, Some(s)) => s
            .parse()
            .map_err(|_| CliError::config("p", format!("solution metadata holds p=`{s}`, not a number"))),
        (None, None) => Err(CliError::config("p", "missing (pass --p; the solution file does not record it)")),
    }
}

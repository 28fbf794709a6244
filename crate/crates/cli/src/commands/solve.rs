use std::path::PathBuf;

use clap::{Args, ValueEnum};
use plap_core::grid::{build_grid, Domain, GridFunction};
use plap_core::solver::{random_initial, solve_from, ProblemSpec, SolverConfig, SolverResult};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{guard, parse_domain, SolverArgs};
use crate::config::{check_n, check_p, finite, merge, required};
use crate::error::{CliError, CliResult};
use crate::expr::Expr;
use crate::output::{out_path, sibling, write_field, write_json, Meta};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    /// Zero inside, boundary data on the boundary.
    #[default]
    Zero,
    /// Seeded uniform noise inside.
    Random,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveArgs {
    /// Power p >= 2.
    #[arg(long, value_parser = finite)]
    pub p: Option<f64>,
    /// Source term: const:c, sinsin, ... (default const:1).
    #[arg(long)]
    pub rhs: Option<String>,
    /// square or disk (default disk).
    #[arg(long)]
    pub domain: Option<String>,
    /// Cells per side, even (default 64).
    #[arg(long)]
    pub n: Option<usize>,
    /// Dirichlet data: zero, const:c, affine:a,b, quad, sincos, offcentre (default zero).
    #[arg(long)]
    pub boundary: Option<String>,
    /// Initial guess for the first continuation level (default zero).
    #[arg(long, value_enum)]
    pub initial: Option<Initial>,
    /// Seed of the random initial guess (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Solution CSV (default solution.csv); the JSON sidecar sits next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML or JSON file with any of the keys above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Fully specified boundary value problem.
#[derive(Clone, Debug, Serialize)]
pub struct Problem {
    pub p: f64,
    pub rhs: Expr,
    pub domain: Domain,
    pub n: usize,
    pub boundary: Expr,
}

impl Problem {
    pub fn resolve(p: Option<f64>, rhs: Option<&str>, domain: Option<&str>, n: Option<usize>, boundary: Option<&str>) -> CliResult<Self> {
        let p = check_p(required(p, "p")?, "p", false)?;
        let rhs = rhs.unwrap_or("const:1").parse().map_err(|e| CliError::config("rhs", e))?;
        let domain = parse_domain(domain.unwrap_or("disk"))?;
        let n = check_n(n.unwrap_or(64))?;
        let boundary = boundary.unwrap_or("zero").parse().map_err(|e| CliError::config("boundary", e))?;
        Ok(Self { p, rhs, domain, n, boundary })
    }

    pub fn spec(&self) -> CliResult<ProblemSpec> {
        self.spec_with_rhs(self.rhs)
    }

    pub fn spec_with_rhs(&self, rhs: Expr) -> CliResult<ProblemSpec> {
        let grid = build_grid(self.n, self.domain == Domain::Disk)?;
        let f = GridFunction::from_fn(&grid, rhs.eval(self.p));
        let g = GridFunction::from_fn(&grid, self.boundary.eval(self.p));
        Ok(ProblemSpec::new(self.p, f, g)?)
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("p".into(), self.p.to_string()),
            ("rhs".into(), self.rhs.to_string()),
            ("boundary".into(), self.boundary.to_string()),
        ]
    }
}

#[derive(Debug, Serialize)]
struct Resolved {
    #[serde(flatten)]
    problem: Problem,
    initial: Initial,
    seed: u64,
    solver: SolverConfig,
}

/// Sidecar body shared by every command that runs the solver.
pub fn diagnostics(res: &SolverResult) -> serde_json::Value {
    json!({
        "converged": res.converged,
        "residual_sup": res.residual_sup,
        "newton_tol": res.newton_tol,
        "iterations": res.newton_iters_total,
        "eps_final": res.eps_final,
        "energy_history": res.energy_history,
        "stages": res.stages,
    })
}

pub fn run(args: SolveArgs) -> CliResult<()> {
    let a = merge(&args, args.config.as_deref())?;
    let problem = Problem::resolve(a.p, a.rhs.as_deref(), a.domain.as_deref(), a.n, a.boundary.as_deref())?;
    let cfg = Resolved {
        problem,
        initial: a.initial.unwrap_or_default(),
        seed: a.seed.unwrap_or(0),
        solver: a.solver.resolve()?,
    };
    let spec = cfg.problem.spec()?;
    let out = out_path(a.out.as_deref(), "solution.csv");
    let sidecar = sibling(&out, ".json");
    let meta = Meta::new("solve", &cfg);

    let start = match cfg.initial {
        Initial::Zero => GridFunction::zeros(spec.grid()),
        Initial::Random => random_initial(&spec, cfg.seed, 1.0),
    };
    let res = guard(solve_from(&spec, &cfg.solver, &start).map_err(CliError::from), &sidecar, &meta)?;
    write_field(&out, &meta, &cfg.problem.describe(), &res.u)?;
    write_json(&sidecar, &meta, diagnostics(&res))?;
    match res.stages.iter().find(|s| !s.converged) {
        None if res.converged => Ok(()),
        Some(s) => Err(CliError::Numerical(format!(
            "solver did not converge at eps = {:e}: residual {:e} after {} iterations (target {:e})",
            s.eps, s.residual_sup, s.iterations, res.newton_tol
        ))),
        None => Err(CliError::Numerical(format!(
            "solver did not converge: residual {:e} above target {:e}",
            res.residual_sup, res.newton_tol
        ))),
    }
}

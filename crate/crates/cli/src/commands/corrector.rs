use std::path::PathBuf;

use clap::Args;
use plap_core::corrector::{corrector_sweep, CorrectorRow};
use plap_core::grid::GridFunction;
use plap_core::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::solve::Problem;
use super::{guard, SolverArgs};
use crate::config::{finite, merge};
use crate::error::{CliError, CliResult};
use crate::output::{num, out_path, sibling, write_json, write_table, Meta};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectorArgs {
    /// Power p >= 2.
    #[arg(long, value_parser = finite)]
    pub p: Option<f64>,
    /// square or disk (default disk).
    #[arg(long)]
    pub domain: Option<String>,
    /// Cells per side, even (default 64).
    #[arg(long)]
    pub n: Option<usize>,
    /// Dirichlet data, as for `solve` (default affine:0.5,0).
    #[arg(long)]
    pub boundary: Option<String>,
    /// Constant source levels, comma separated (default 1,0.1,0.01).
    #[arg(long, value_delimiter = ',', value_parser = finite)]
    pub levels: Option<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Sweep CSV (default corrector.csv); the JSON sidecar sits next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML or JSON file with any of the keys above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    p: f64,
    domain: plap_core::grid::Domain,
    n: usize,
    boundary: crate::expr::Expr,
    levels: Vec<f64>,
    solver: SolverConfig,
}

/// Whether each entry is strictly below the previous one.
fn decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

pub fn run(args: CorrectorArgs) -> CliResult<()> {
    let a = merge(&args, args.config.as_deref())?;
    let problem = Problem::resolve(
        a.p,
        Some("zero"),
        a.domain.as_deref(),
        a.n,
        Some(a.boundary.as_deref().unwrap_or("affine:0.5,0")),
    )?;
    let levels = a.levels.clone().unwrap_or_else(|| vec![1.0, 0.1, 0.01]);
    if levels.is_empty() {
        return Err(CliError::config("levels", "needs at least one value"));
    }
    if let Some(bad) = levels.iter().find(|c| !c.is_finite()) {
        return Err(CliError::config("levels", format!("{bad} is not finite")));
    }
    let cfg = Resolved {
        p: problem.p,
        domain: problem.domain,
        n: problem.n,
        boundary: problem.boundary,
        levels,
        solver: a.solver.resolve()?,
    };
    let spec = problem.spec()?;
    let dirichlet: &GridFunction = spec.dirichlet();
    let out = out_path(a.out.as_deref(), "corrector.csv");
    let sidecar = sibling(&out, ".json");
    let meta = Meta::new("corrector", &cfg);

    let rows: Vec<CorrectorRow> = guard(
        corrector_sweep(cfg.p, dirichlet, &cfg.levels, &cfg.solver).map_err(CliError::from),
        &sidecar,
        &meta,
    )?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.f_sup),
                num(r.u_sup),
                num(r.xi_sup),
                num(r.grad_xi_sup),
                r.converged.to_string(),
            ]
        })
        .collect();
    write_table(&out, &meta, &["f_sup", "u_sup", "xi_sup", "grad_xi_sup", "converged"], &table)?;
    let all_converged = rows.iter().all(|r| r.converged);
    write_json(
        &sidecar,
        &meta,
        json!({
            "rows": rows,
            "all_converged": all_converged,
            "xi_sup_decreasing": decreasing(rows.iter().map(|r| r.xi_sup)),
            "grad_xi_sup_decreasing": decreasing(rows.iter().map(|r| r.grad_xi_sup)),
        }),
    )?;
    if all_converged {
        Ok(())
    } else {
        Err(CliError::Numerical("a solve in the sweep did not converge".into()))
    }
}

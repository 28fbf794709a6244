use std::path::PathBuf;

use clap::Args;
use plap_core::exponents::{conjugate, radial_constant};
use plap_core::grid::{build_grid, GridFunction};
use plap_core::oscillation::{crack_bound_constant, fit_exponent, profile, Which};
use plap_core::solver::{solve, ProblemSpec, SolverConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{guard, SolverArgs};
use crate::config::{check_n, check_p, finite, merge};
use crate::error::{CliError, CliResult};
use crate::output::{num, out_path, sibling, write_json, write_table, Meta};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceArgs {
    /// Power p > 2 (default 3).
    #[arg(long, value_parser = finite)]
    pub p: Option<f64>,
    /// Resolutions, comma separated and increasing (default 32,64,128).
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Largest oscillation radius (default 0.25).
    #[arg(long, value_parser = finite)]
    pub rmax: Option<f64>,
    /// Most radii per profile; fewer are used where the mesh cannot resolve them (default 5).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Ratio between consecutive radii (default 0.5).
    #[arg(long, value_parser = finite)]
    pub ratio: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Study CSV (default convergence.csv); the JSON sidecar sits next to it.
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
    ns: Vec<usize>,
    rmax: f64,
    levels: usize,
    ratio: f64,
    solver: SolverConfig,
}

#[derive(Debug, Serialize)]
struct Row {
    n: usize,
    h: f64,
    err_inf: f64,
    err_ratio: Option<f64>,
    levels: usize,
    crack_constant: Option<f64>,
    osc_slope: Option<f64>,
    converged: bool,
}

fn resolve(a: &ConvergenceArgs) -> CliResult<Resolved> {
    let p = check_p(a.p.unwrap_or(3.0), "p", true)?;
    let ns = a.ns.clone().unwrap_or_else(|| vec![32, 64, 128]);
    if ns.is_empty() {
        return Err(CliError::config("ns", "needs at least one resolution"));
    }
    for &n in &ns {
        check_n(n).map_err(|_| CliError::config("ns", format!("{n} is not an even integer >= 4")))?;
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config("ns", "must be strictly increasing"));
    }
    let rmax = a.rmax.unwrap_or(0.25);
    if !(rmax > 0.0 && rmax <= 1.0) {
        return Err(CliError::config("rmax", format!("must lie in (0, 1], got {rmax}")));
    }
    let ratio = a.ratio.unwrap_or(0.5);
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CliError::config("ratio", format!("must lie in (0, 1), got {ratio}")));
    }
    let levels = a.levels.unwrap_or(5);
    if levels < 3 {
        return Err(CliError::config("levels", format!("must be at least 3, got {levels}")));
    }
    Ok(Resolved {
        p,
        ns,
        rmax,
        levels,
        ratio,
        solver: a.solver.resolve()?,
    })
}

/// Radii `rmax ratio^k` that stay at or above the mesh size.
fn usable_levels(rmax: f64, ratio: f64, h: f64, cap: usize) -> usize {
    (0..cap).take_while(|&k| rmax * ratio.powi(k as i32) >= h * (1.0 - 1e-12)).count()
}

pub fn run(args: ConvergenceArgs) -> CliResult<()> {
    let a = merge(&args, args.config.as_deref())?;
    let cfg = resolve(&a)?;
    let out = out_path(a.out.as_deref(), "convergence.csv");
    let sidecar = sibling(&out, ".json");
    let meta = Meta::new("convergence", &cfg);
    let c = radial_constant(2, cfg.p)?;
    let q = conjugate(cfg.p)?;

    let result = (|| -> CliResult<Vec<Row>> {
        let mut rows: Vec<Row> = Vec::new();
        for &n in &cfg.ns {
            let grid = build_grid(n, true)?;
            let spec = ProblemSpec::new(cfg.p, GridFunction::from_fn(&grid, |_, _| 1.0), GridFunction::zeros(&grid))?;
            let res = solve(&spec, &cfg.solver)?;
            let exact = GridFunction::from_fn(&grid, |x, y| c * (1.0 - x.hypot(y).powf(q)));
            let err_inf = res.u.sup_distance(&exact);
            let levels = usable_levels(cfg.rmax, cfg.ratio, grid.h(), cfg.levels);
            let (crack_constant, osc_slope) = if levels >= 3 {
                let pr = profile(&res.u, grid.origin(), cfg.rmax, levels, cfg.ratio)?;
                let slope = fit_exponent(&pr, Which::Centered).ok().map(|f| f.slope);
                (Some(crack_bound_constant(&pr, cfg.p)?), slope)
            } else {
                (None, None)
            };
            rows.push(Row {
                n,
                h: grid.h(),
                err_inf,
                err_ratio: rows.last().map(|prev| err_inf / prev.err_inf),
                levels,
                crack_constant,
                osc_slope,
                converged: res.converged,
            });
        }
        Ok(rows)
    })();
    let rows = guard(result, &sidecar, &meta)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                num(r.h),
                num(r.err_inf),
                num(r.err_ratio),
                r.levels.to_string(),
                num(r.crack_constant),
                num(r.osc_slope),
                r.converged.to_string(),
            ]
        })
        .collect();
    write_table(
        &out,
        &meta,
        &["n", "h", "err_inf", "err_ratio", "levels", "crack_constant", "osc_slope", "converged"],
        &table,
    )?;
    let all_converged = rows.iter().all(|r| r.converged);
    write_json(
        &sidecar,
        &meta,
        json!({ "p_conj": q, "radial_constant": c, "rows": rows, "all_converged": all_converged }),
    )?;
    if all_converged {
        Ok(())
    } else {
        Err(CliError::Numerical("a solve in the study did not converge".into()))
    }
}

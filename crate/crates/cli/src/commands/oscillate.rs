use std::path::PathBuf;

use clap::Args;
use plap_core::oscillation::{bound_rhs, classify, crack_bound_constant, fit_exponent, profile, Which};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{base_node, guard, p_from};
use crate::config::{check_p, finite, merge, required, LatticePoint};
use crate::error::{CliError, CliResult};
use crate::output::{num, out_path, read_field, sibling, write_json, write_table, Meta};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillateArgs {
    /// Solution CSV written by `solve`.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    /// Base node as lattice indices i,j (default the origin).
    #[arg(long)]
    pub x0: Option<LatticePoint>,
    /// Largest radius (default 0.25).
    #[arg(long, value_parser = finite)]
    pub rmax: Option<f64>,
    /// Number of radii (default 5).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Ratio between consecutive radii (default 0.5).
    #[arg(long, value_parser = finite)]
    pub ratio: Option<f64>,
    /// Power p > 2 (default the `p` recorded in the solution file).
    #[arg(long, value_parser = finite)]
    pub p: Option<f64>,
    /// Profile CSV (default profile.csv); the JSON sidecar sits next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML or JSON file with any of the keys above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    solution_sha256: String,
    x0: Option<LatticePoint>,
    rmax: f64,
    levels: usize,
    ratio: f64,
    p: f64,
}

pub fn run(args: OscillateArgs) -> CliResult<()> {
    let a = merge(&args, args.config.as_deref())?;
    let field = read_field(&required(a.solution.clone(), "solution")?, "solution")?;
    let p = check_p(p_from(a.p, field.get("p"))?, "p", true)?;
    let rmax = a.rmax.unwrap_or(0.25);
    if !(rmax > 0.0 && rmax <= 2.0) {
        return Err(CliError::config("rmax", format!("must lie in (0, 2], got {rmax}")));
    }
    let ratio = a.ratio.unwrap_or(0.5);
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CliError::config("ratio", format!("must lie in (0, 1), got {ratio}")));
    }
    let levels = a.levels.unwrap_or(5);
    if levels < 3 {
        return Err(CliError::config("levels", format!("must be at least 3, got {levels}")));
    }
    let cfg = Resolved {
        solution_sha256: field.sha256.clone(),
        x0: a.x0,
        rmax,
        levels,
        ratio,
        p,
    };
    let u = &field.u;
    let x0 = base_node(u.grid(), cfg.x0)?;
    let out = out_path(a.out.as_deref(), "profile.csv");
    let sidecar = sibling(&out, ".json");
    let meta = Meta::new("oscillate", &cfg);

    let pr = profile(u, x0, rmax, levels, ratio).map_err(|e| match e {
        plap_core::Error::InsufficientResolution(m) => CliError::config("levels", m),
        other => other.into(),
    })?;
    let g = pr.grad_norm();
    let result = (|| -> CliResult<(Vec<Vec<String>>, Value)> {
        let mut rows = Vec::with_capacity(levels);
        for (k, &r) in pr.radii.iter().enumerate() {
            let bound = bound_rhs(r, g, p)?;
            rows.push(vec![
                num(r),
                num(pr.osc_centered[k]),
                num(pr.osc_linear[k]),
                num(bound),
                num(pr.osc_centered[k] / bound),
            ]);
        }
        let fit = |which| match fit_exponent(&pr, which) {
            Ok(f) => json!(f),
            Err(e) => json!({ "error": e.to_string() }),
        };
        let constant = crack_bound_constant(&pr, p)?;
        if !constant.is_finite() {
            return Err(CliError::Numerical(format!("oscillation bound constant is {constant}")));
        }
        let defect = pr.triangle_defect();
        let (i, j) = u.grid().lattice(x0);
        let body = json!({
            "x0": { "node": x0, "lattice": [i, j], "coords": pr.x0_coords },
            "grad0": pr.grad0,
            "grad_norm": g,
            "fits": {
                "centered": fit(Which::Centered),
                "linear_corrected": fit(Which::LinearCorrected),
            },
            "crack_bound_constant": constant,
            "classification": pr.radii.iter().map(|&r| json!({ "r": r, "class": classify(g, r, p) })).collect::<Vec<_>>(),
            "triangle_defect": defect,
            "triangle_inequalities_hold": defect <= 0.0,
        });
        Ok((rows, body))
    })();
    let (rows, body) = guard(result, &sidecar, &meta)?;
    write_table(&out, &meta, &["r", "osc_centered", "osc_linear", "bound_rhs", "ratio_to_bound"], &rows)?;
    write_json(&sidecar, &meta, body)
}

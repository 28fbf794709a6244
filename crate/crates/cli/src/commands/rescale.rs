use std::path::PathBuf;

use clap::Args;
use plap_core::grid::GridFunction;
use plap_core::scaling::{lambda_rescale, mu_rescale, theta_normalize, ScalingKind};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{base_node, guard, p_from};
use crate::config::{check_p, finite, merge, required, LatticePoint};
use crate::error::{CliError, CliResult};
use crate::expr::Expr;
use crate::output::{out_path, read_field, sibling, write_field, write_json, Meta};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RescaleArgs {
    /// theta, lambda or mu.
    #[arg(long)]
    pub kind: Option<String>,
    /// Solution CSV written by `solve`.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    /// Base node as lattice indices i,j (default the origin; theta is always centred there).
    #[arg(long)]
    pub x0: Option<LatticePoint>,
    /// Power p > 2 (default the `p` recorded in the solution file).
    #[arg(long, value_parser = finite)]
    pub p: Option<f64>,
    /// Shrink factor of the lambda map, in (0, 1/2) (default 0.25).
    #[arg(long, value_parser = finite)]
    pub lambda0: Option<f64>,
    /// Target source size of the theta map (default 1).
    #[arg(long, value_parser = finite)]
    pub delta0: Option<f64>,
    /// Source term for theta (default the `rhs` recorded in the solution file).
    #[arg(long)]
    pub rhs: Option<String>,
    /// Rescaled field CSV (default rescaled.csv); the record goes to the JSON sidecar.
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
    kind: ScalingKind,
    x0: Option<LatticePoint>,
    p: f64,
    lambda0: Option<f64>,
    delta0: Option<f64>,
    rhs: Option<Expr>,
}

fn resolve(a: &RescaleArgs, sha: String, meta_p: Option<&str>, meta_rhs: Option<&str>) -> CliResult<Resolved> {
    let kind: ScalingKind = required(a.kind.as_deref(), "kind")?
        .parse()
        .map_err(|_| CliError::config("kind", "expected theta, lambda or mu"))?;
    let p = check_p(p_from(a.p, meta_p)?, "p", true)?;
    let only = |key: &str, given: bool, wanted: ScalingKind| {
        if given && kind != wanted {
            Err(CliError::config(key, format!("only used with kind = {wanted}")))
        } else {
            Ok(())
        }
    };
    only("lambda0", a.lambda0.is_some(), ScalingKind::Lambda)?;
    only("delta0", a.delta0.is_some(), ScalingKind::Theta)?;
    only("rhs", a.rhs.is_some(), ScalingKind::Theta)?;
    if kind == ScalingKind::Theta && a.x0.is_some() {
        return Err(CliError::config("x0", "the theta map is centred at the origin"));
    }
    let (mut lambda0, mut delta0, mut rhs) = (None, None, None);
    match kind {
        ScalingKind::Lambda => {
            let l = a.lambda0.unwrap_or(0.25);
            if !(l > 0.0 && l < 0.5) {
                return Err(CliError::config("lambda0", format!("must lie in (0, 0.5), got {l}")));
            }
            lambda0 = Some(l);
        }
        ScalingKind::Theta => {
            let d = a.delta0.unwrap_or(1.0);
            if !(d > 0.0) || !d.is_finite() {
                return Err(CliError::config("delta0", format!("must be positive, got {d}")));
            }
            delta0 = Some(d);
            let id = a.rhs.as_deref().or(meta_rhs).ok_or_else(|| {
                CliError::config("rhs", "missing (pass --rhs; the solution file does not record it)")
            })?;
            rhs = Some(id.parse::<Expr>().map_err(|e| CliError::config("rhs", e))?);
        }
        ScalingKind::Mu => {}
    }
    Ok(Resolved {
        solution_sha256: sha,
        kind,
        x0: a.x0,
        p,
        lambda0,
        delta0,
        rhs,
    })
}

pub fn run(args: RescaleArgs) -> CliResult<()> {
    let a = merge(&args, args.config.as_deref())?;
    let field = read_field(&required(a.solution.clone(), "solution")?, "solution")?;
    let cfg = resolve(&a, field.sha256.clone(), field.get("p"), field.get("rhs"))?;
    let u = &field.u;
    let x0 = base_node(u.grid(), cfg.x0)?;
    let out = out_path(a.out.as_deref(), "rescaled.csv");
    let sidecar = sibling(&out, ".json");
    let meta = Meta::new("rescale", &cfg);

    let result = match cfg.kind {
        ScalingKind::Theta => {
            let rhs = cfg.rhs.expect("theta has a source term");
            let f = GridFunction::from_fn(u.grid(), rhs.eval(cfg.p));
            theta_normalize(u, &f, cfg.p, cfg.delta0.expect("theta has delta0"))
                .map(|(v, ft, rec)| (v, Some(ft), rec))
        }
        ScalingKind::Lambda => {
            lambda_rescale(u, x0, cfg.lambda0.expect("lambda has lambda0"), cfg.p).map(|(v, rec)| (v, None, rec))
        }
        ScalingKind::Mu => mu_rescale(u, x0, cfg.p).map(|(v, rec)| (v, None, rec)),
    };
    let (v, f_tilde, rec) = guard(result.map_err(CliError::from), &sidecar, &meta)?;
    let extra = vec![("p".to_string(), cfg.p.to_string()), ("kind".to_string(), cfg.kind.to_string())];
    write_field(&out, &meta, &extra, &v)?;
    let mut body = json!({ "record": rec });
    if let Some(ft) = &f_tilde {
        let path = sibling(&out, "_f_tilde.csv");
        write_field(&path, &meta, &extra, ft)?;
        body["f_tilde_sup"] = json!(ft.sup_norm());
    }
    write_json(&sidecar, &meta, body)
}

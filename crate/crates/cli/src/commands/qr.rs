use std::path::PathBuf;

use clap::Args;
use plap_core::quasiregular::{
    complex_gradient, frobenius_density, gradient_mapping_defect, jacobian_check, kqr_defect, morrey_growth,
    nondegenerate_mask, wirtinger, NodalCheck, DEFAULT_GRAD_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{base_node, guard, p_from};
use crate::config::{check_p, finite, merge, required, LatticePoint};
use crate::error::{CliError, CliResult};
use crate::output::{num, out_path, read_field, sibling, write_json, write_table, Meta};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QrArgs {
    /// Solution CSV written by `solve`.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    /// Power p > 2 (default the `p` recorded in the solution file).
    #[arg(long, value_parser = finite)]
    pub p: Option<f64>,
    /// Only nodes with recovered |grad u| at least this are checked (default 0.1).
    #[arg(long, value_parser = finite)]
    pub threshold: Option<f64>,
    /// Morrey radii, comma separated (default 0.5 2^-k above twice the mesh size).
    #[arg(long, value_delimiter = ',', value_parser = finite)]
    pub radii: Option<Vec<f64>>,
    /// Centre of the Morrey balls as lattice indices i,j (default the origin).
    #[arg(long)]
    pub x0: Option<LatticePoint>,
    /// Report JSON (default qr_report.json); the Morrey table goes to <stem>_morrey.csv.
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
    p: f64,
    threshold: f64,
    radii: Vec<f64>,
    x0: Option<LatticePoint>,
}

fn summary(check: &NodalCheck) -> Value {
    if check.count() == 0 {
        return json!({ "count": 0 });
    }
    json!({
        "count": check.count(),
        "positive_sup": check.positive_sup(),
        "max": check.max(),
        "q50": check.quantile(0.5),
        "q90": check.quantile(0.9),
        "q99": check.quantile(0.99),
    })
}

pub fn run(args: QrArgs) -> CliResult<()> {
    let a = merge(&args, args.config.as_deref())?;
    let field = read_field(&required(a.solution.clone(), "solution")?, "solution")?;
    let u = &field.u;
    let grid = u.grid();
    let p = check_p(p_from(a.p, field.get("p"))?, "p", true)?;
    let threshold = a.threshold.unwrap_or(DEFAULT_GRAD_THRESHOLD);
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(CliError::config("threshold", format!("must be finite and non-negative, got {threshold}")));
    }
    let floor = 2.0 * grid.h();
    let radii = match a.radii.clone() {
        Some(r) => r,
        None => (0..).map(|k| 0.5 * 0.5f64.powi(k)).take_while(|&r| r > floor).collect(),
    };
    if let Some(&bad) = radii.iter().find(|&&r| !(r > floor && r <= 0.5)) {
        return Err(CliError::config("radii", format!("{bad} must lie in ({floor}, 0.5]")));
    }
    let cfg = Resolved {
        solution_sha256: field.sha256.clone(),
        p,
        threshold,
        radii,
        x0: a.x0,
    };
    let centre = grid.node(base_node(grid, cfg.x0)?);
    let out = out_path(a.out.as_deref(), "qr_report.json");
    let morrey_path = sibling(&out, "_morrey.csv");
    let meta = Meta::new("qr", &cfg);

    let result = (|| -> CliResult<(Vec<Vec<String>>, Value)> {
        let phi = wirtinger(&complex_gradient(u));
        let mask = nondegenerate_mask(u, threshold);
        let kqr = kqr_defect(&phi, p)?.restrict(&mask);
        let jac = jacobian_check(&phi, p)?.restrict(&mask);
        let frob = frobenius_density(&phi)?.restrict(&mask);
        let gm = gradient_mapping_defect(&phi, u)?;
        let morrey = morrey_growth(&phi, p, &cfg.radii, centre)?;
        let rows = morrey
            .iter()
            .map(|m| vec![num(m.r), num(m.integral), num(m.ratio)])
            .collect();
        let body = json!({
            "nodes_checked": mask.iter().filter(|&&b| b).count(),
            "kqr_defect": summary(&kqr),
            "jacobian_check": summary(&jac),
            "frobenius_density": summary(&frob),
            "gradient_mapping": gm,
            "morrey": morrey,
        });
        Ok((rows, body))
    })();
    let (rows, body) = guard(result, &out, &meta)?;
    write_table(&morrey_path, &meta, &["r", "integral", "ratio"], &rows)?;
    write_json(&out, &meta, body)
}

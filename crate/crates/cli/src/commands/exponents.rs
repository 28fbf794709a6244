use std::path::PathBuf;

use clap::Args;
use plap_core::exponents::ExponentSet;
use serde::{Deserialize, Serialize};

use crate::config::{check_p, finite, merge};
use crate::error::{CliError, CliResult};
use crate::output::{num, out_path, write_table, Meta};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsArgs {
    /// Smallest p (default 2.1).
    #[arg(long, value_parser = finite)]
    pub p_min: Option<f64>,
    /// Largest p (default 10).
    #[arg(long, value_parser = finite)]
    pub p_max: Option<f64>,
    /// Number of equally spaced p values (default 5).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output CSV (default exponents.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML or JSON file with any of the keys above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    p_min: f64,
    p_max: f64,
    steps: usize,
}

fn resolve(a: &ExponentsArgs) -> CliResult<Resolved> {
    let p_min = check_p(a.p_min.unwrap_or(2.1), "p_min", false)?;
    let p_max = check_p(a.p_max.unwrap_or(10.0), "p_max", false)?;
    if p_max < p_min {
        return Err(CliError::config("p_max", format!("must be >= p_min = {p_min}, got {p_max}")));
    }
    let steps = a.steps.unwrap_or(5);
    if steps == 0 {
        return Err(CliError::config("steps", "must be at least 1"));
    }
    if steps == 1 && p_max != p_min {
        return Err(CliError::config("steps", "a single step needs p_min = p_max"));
    }
    Ok(Resolved { p_min, p_max, steps })
}

pub fn run(args: ExponentsArgs) -> CliResult<()> {
    let a = merge(&args, args.config.as_deref())?;
    let cfg = resolve(&a)?;
    let out = out_path(a.out.as_deref(), "exponents.csv");
    let meta = Meta::new("exponents", &cfg);

    let mut rows = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let p = if cfg.steps == 1 {
            cfg.p_min
        } else {
            cfg.p_min + (cfg.p_max - cfg.p_min) * k as f64 / (cfg.steps - 1) as f64
        };
        let e = ExponentSet::new(p)?;
        rows.push(vec![
            num(e.p),
            num(e.p_conj),
            num(e.alpha_star),
            num(e.alpha_bk),
            num(e.alpha_crit),
            num(e.tau0),
            num(e.c_radial),
            e.chain_pass().to_string(),
        ]);
    }
    write_table(
        &out,
        &meta,
        &["p", "p_conj", "alpha_star", "alpha_bk", "alpha_crit", "tau0", "c_radial_2d", "chain_pass"],
        &rows,
    )
}

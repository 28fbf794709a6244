//! p-harmonic replacement of a solution and the resulting corrector.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{recover_gradient, GridFunction};
use crate::solver::{solve, ProblemSpec, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrectorRow {
    pub f_sup: f64,
    pub u_sup: f64,
    /// `‖ξ‖∞` with `ξ = u_harm - u`.
    pub xi_sup: f64,
    /// Sup of the recovered `|∇ξ|`.
    pub grad_xi_sup: f64,
    pub converged: bool,
}

/// Solves the homogeneous problem with the boundary trace of `u` and reports
/// `ξ = u_harm - u`.
pub fn corrector(u: &GridFunction, spec: &ProblemSpec, config: &SolverConfig) -> Result<(GridFunction, CorrectorRow)> {
    let u_sup = u.sup_norm();
    if u_sup > 1.0 {
        return Err(Error::Config(format!(
            "corrector needs a solution with sup norm at most 1, got {u_sup}"
        )));
    }
    let grid = spec.grid();
    let homogeneous = ProblemSpec::new(spec.p(), GridFunction::zeros(grid), u.clone())?;
    let harm = solve(&homogeneous, config)?;
    let xi: Vec<f64> = harm
        .u
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, b)| a - b)
        .collect();
    let xi = GridFunction::from_values(grid, xi)?;
    let row = CorrectorRow {
        f_sup: spec.f().sup_norm(),
        u_sup,
        xi_sup: xi.sup_norm(),
        grad_xi_sup: recover_gradient(&xi).sup_norm(),
        converged: harm.converged,
    };
    Ok((xi, row))
}

/// For each level `c`, solves with `f ≡ c` and the given Dirichlet data, then
/// measures the corrector.
pub fn corrector_sweep(
    p: f64,
    dirichlet: &GridFunction,
    levels: &[f64],
    config: &SolverConfig,
) -> Result<Vec<CorrectorRow>> {
    let grid = dirichlet.grid();
    levels
        .iter()
        .map(|&c| {
            let spec = ProblemSpec::new(p, GridFunction::from_fn(grid, |_, _| c), dirichlet.clone())?;
            let sol = solve(&spec, config)?;
            let (_, mut row) = corrector(&sol.u, &spec, config)?;
            row.converged &= sol.converged;
            Ok(row)
        })
        .collect()
}

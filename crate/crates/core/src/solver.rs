//! Variational solver for the discrete p-Poisson problem `-Δ_p u = f`.
//!
//! The discrete energy is
//!
//! ```text
//! E_eps(u) = sum_T |T| ((|∇u_T|^2 + eps^2)^{p/2} - eps^p) / p  -  sum_i m_i f_i u_i
//! ```
//!
//! with P1 gradients `∇u_T` and lumped nodal masses `m_i`. For `eps > 0` it is
//! strictly convex in the interior values, so damped Newton with an Armijo
//! backtracking search converges globally. The regularization is driven
//! geometrically from `eps0` down to `eps_min`, each stage warm-started from
//! the previous one.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::sparse::{pcg, CsrMatrix};

/// A p-Poisson instance on a grid: power, source and Dirichlet data.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    p: f64,
    f: GridFunction,
    dirichlet: GridFunction,
}

impl ProblemSpec {
    /// `dirichlet` is read only on boundary nodes.
    pub fn new(p: f64, f: GridFunction, dirichlet: GridFunction) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::Config(format!("p must be >= 2, got {p}")));
        }
        if !Arc::ptr_eq(f.grid(), dirichlet.grid()) {
            return Err(Error::Config(
                "source and Dirichlet data live on different grids".into(),
            ));
        }
        Ok(Self { p, f, dirichlet })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn f(&self) -> &GridFunction {
        &self.f
    }

    pub fn dirichlet(&self) -> &GridFunction {
        &self.dirichlet
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.f.grid()
    }

    /// Residual target used when the config leaves it unset.
    pub fn default_tolerance(&self) -> f64 {
        1e-9 * (self.f.sup_norm() + 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub eps0: f64,
    pub eps_min: f64,
    pub eps_factor: f64,
    /// Residual sup-norm target; `None` means `1e-9 (||f||_inf + 1)`.
    pub newton_tol: Option<f64>,
    pub max_newton: usize,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub cg_rel_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps0: 1e-1,
            eps_min: 1e-8,
            eps_factor: 0.1,
            newton_tol: None,
            max_newton: 50,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            cg_rel_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("{key}: {why}")));
        if !(self.eps_min > 0.0) {
            return bad("eps_min", "must be positive");
        }
        if !(self.eps0 >= self.eps_min) || !self.eps0.is_finite() {
            return bad("eps0", "must be finite and >= eps_min");
        }
        if !(self.eps_factor > 0.0 && self.eps_factor < 1.0) {
            return bad("eps_factor", "must lie in (0, 1)");
        }
        if let Some(tol) = self.newton_tol {
            if !(tol > 0.0) {
                return bad("newton_tol", "must be positive");
            }
        }
        if self.max_newton == 0 {
            return bad("max_newton", "must be at least 1");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c", "must lie in (0, 1)");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo_shrink", "must lie in (0, 1)");
        }
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol < 1.0) {
            return bad("cg_rel_tol", "must lie in (0, 1)");
        }
        Ok(())
    }

    /// Regularization levels visited by the continuation.
    pub fn eps_schedule(&self) -> Vec<f64> {
        let mut out = vec![self.eps0];
        let mut eps = self.eps0;
        while eps > self.eps_min * (1.0 + 1e-12) {
            eps = (eps * self.eps_factor).max(self.eps_min);
            out.push(eps);
        }
        out
    }
}

/// Diagnostics for one continuation level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageReport {
    pub eps: f64,
    pub iterations: usize,
    pub residual_sup: f64,
    pub converged: bool,
    /// Slice of `energy_history` produced by this stage.
    pub history_start: usize,
    pub history_len: usize,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub u: GridFunction,
    pub residual_sup: f64,
    pub newton_tol: f64,
    /// Energy after the stage start and after every accepted step.
    pub energy_history: Vec<f64>,
    pub stages: Vec<StageReport>,
    pub newton_iters_total: usize,
    pub eps_final: f64,
    /// Every continuation stage reached the residual target.
    pub converged: bool,
}

impl SolverResult {
    /// Energy values recorded during one stage.
    pub fn stage_history(&self, stage: usize) -> &[f64] {
        let s = &self.stages[stage];
        &self.energy_history[s.history_start..s.history_start + s.history_len]
    }
}

/// Per-triangle regularized integrand `((s + eps^2)^{p/2} - eps^p) / p`, `s = |g|^2`.
fn integrand(s: f64, eps: f64, p: f64) -> f64 {
    if eps > 0.0 {
        let e2 = eps * eps;
        eps.powf(p) * ((0.5 * p) * (s / e2).ln_1p()).exp_m1() / p
    } else {
        s.powf(0.5 * p) / p
    }
}

/// `(s + eps^2)^{(p-2)/2}`, the flux coefficient.
fn flux_coeff(s: f64, eps: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        (s + eps * eps).powf(0.5 * (p - 2.0))
    }
}

fn energy_value(u: &GridFunction, spec: &ProblemSpec, eps: f64) -> f64 {
    let grid = spec.grid();
    let p = spec.p;
    let mut dirichlet = 0.0;
    for t in 0..grid.triangles().len() {
        let g = u.triangle_gradient(t);
        let s = g[0] * g[0] + g[1] * g[1];
        dirichlet += grid.areas()[t] * integrand(s, eps, p);
    }
    let load: f64 = grid
        .active_nodes()
        .map(|k| grid.lumped_mass()[k] * spec.f.value(k) * u.value(k))
        .sum();
    dirichlet - load
}

/// `((s0 + ds + eps^2)^{p/2} - (s0 + eps^2)^{p/2}) / p` without cancellation.
fn integrand_change(s0: f64, ds: f64, eps: f64, p: f64) -> f64 {
    let base = s0 + eps * eps;
    if base > 0.0 {
        base.powf(0.5 * p) * ((0.5 * p) * (ds / base).ln_1p()).exp_m1() / p
    } else {
        (s0 + ds).max(0.0).powf(0.5 * p) / p
    }
}

/// Energy change along `u + t * step` together with the sum of absolute
/// contributions, which sets the scale of rounding noise.
///
/// Summing per-triangle differences keeps the change accurate long after the
/// difference of two total energies has drowned in rounding error.
fn energy_change(u: &GridFunction, du: &GridFunction, t: f64, spec: &ProblemSpec, eps: f64) -> (f64, f64) {
    let grid = spec.grid();
    let p = spec.p;
    let mut delta = 0.0;
    let mut scale = 0.0;
    for tri in 0..grid.triangles().len() {
        let g = u.triangle_gradient(tri);
        let d = du.triangle_gradient(tri);
        let d = [t * d[0], t * d[1]];
        let s0 = g[0] * g[0] + g[1] * g[1];
        let ds = d[0] * (2.0 * g[0] + d[0]) + d[1] * (2.0 * g[1] + d[1]);
        let c = grid.areas()[tri] * integrand_change(s0, ds, eps, p);
        delta += c;
        scale += c.abs();
    }
    for k in grid.active_nodes() {
        let c = grid.lumped_mass()[k] * spec.f.value(k) * t * du.value(k);
        delta -= c;
        scale += c.abs();
    }
    (delta, scale)
}

/// Discrete regularized p-Dirichlet energy minus the lumped load.
pub fn energy(u: &GridFunction, spec: &ProblemSpec, eps: f64) -> f64 {
    energy_value(u, spec, eps)
}

/// Gradient of [`energy`] with respect to the nodal values, zeroed on
/// Dirichlet and masked nodes.
pub fn residual(u: &GridFunction, spec: &ProblemSpec, eps: f64) -> GridFunction {
    let grid = spec.grid();
    let p = spec.p;
    let mut r = vec![0.0; grid.num_nodes()];
    for (t, tri) in grid.triangles().iter().enumerate() {
        let g = u.triangle_gradient(t);
        let s = g[0] * g[0] + g[1] * g[1];
        let a = grid.areas()[t] * flux_coeff(s, eps, p);
        let bg = &grid.basis_grads()[t];
        for k in 0..3 {
            r[tri[k]] += a * (g[0] * bg[k][0] + g[1] * bg[k][1]);
        }
    }
    for k in 0..grid.num_nodes() {
        if grid.is_interior(k) {
            r[k] -= grid.lumped_mass()[k] * spec.f.value(k);
        } else {
            r[k] = 0.0;
        }
    }
    GridFunction::from_values(grid, r).unwrap_or_else(|_| GridFunction::zeros(grid))
}

/// Maps interior nodes to unknown indices and owns the Hessian pattern.
struct Assembler {
    dof_of: Vec<Option<usize>>,
    node_of: Vec<usize>,
    hessian: CsrMatrix,
}

impl Assembler {
    fn new(grid: &Grid) -> Self {
        let mut dof_of = vec![None; grid.num_nodes()];
        let mut node_of = Vec::new();
        for k in 0..grid.num_nodes() {
            if grid.is_interior(k) {
                dof_of[k] = Some(node_of.len());
                node_of.push(k);
            }
        }
        let mut entries = Vec::new();
        for tri in grid.triangles() {
            for &a in tri {
                for &b in tri {
                    if let (Some(i), Some(j)) = (dof_of[a], dof_of[b]) {
                        entries.push((i, j));
                    }
                }
            }
        }
        let hessian = CsrMatrix::from_pattern(node_of.len(), entries);
        Self {
            dof_of,
            node_of,
            hessian,
        }
    }

    fn assemble_hessian(&mut self, u: &GridFunction, spec: &ProblemSpec, eps: f64) {
        let grid = spec.grid();
        let p = spec.p;
        self.hessian.clear();
        for (t, tri) in grid.triangles().iter().enumerate() {
            let g = u.triangle_gradient(t);
            let s = g[0] * g[0] + g[1] * g[1];
            let area = grid.areas()[t];
            let a = flux_coeff(s, eps, p);
            let b = if p == 2.0 {
                0.0
            } else {
                (p - 2.0) * (s + eps * eps).powf(0.5 * (p - 4.0))
            };
            let bg = &grid.basis_grads()[t];
            for ka in 0..3 {
                let Some(i) = self.dof_of[tri[ka]] else { continue };
                let ga = bg[ka];
                let ga_g = ga[0] * g[0] + ga[1] * g[1];
                for kb in 0..3 {
                    let Some(j) = self.dof_of[tri[kb]] else { continue };
                    let gb = bg[kb];
                    let gb_g = gb[0] * g[0] + gb[1] * g[1];
                    let v = a * (ga[0] * gb[0] + ga[1] * gb[1]) + b * ga_g * gb_g;
                    self.hessian.add(i, j, area * v);
                }
            }
        }
    }
}

/// Interior values drawn uniformly from `[-amplitude, amplitude]`, boundary
/// values from the Dirichlet data.
pub fn random_initial(spec: &ProblemSpec, seed: u64, amplitude: f64) -> GridFunction {
    let grid = spec.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = GridFunction::zeros(grid);
    let vals = u.values_mut();
    for k in 0..grid.num_nodes() {
        let v: f64 = rng.gen_range(-1.0..=1.0);
        if grid.is_interior(k) {
            vals[k] = amplitude * v;
        } else if grid.is_active(k) {
            vals[k] = spec.dirichlet.value(k);
        }
    }
    u
}

/// Solves from the default initial guess: zero inside, Dirichlet data on the boundary.
pub fn solve(spec: &ProblemSpec, config: &SolverConfig) -> Result<SolverResult> {
    let u0 = GridFunction::zeros(spec.grid());
    solve_from(spec, config, &u0)
}

/// Solves starting from the interior values of `initial`.
pub fn solve_from(
    spec: &ProblemSpec,
    config: &SolverConfig,
    initial: &GridFunction,
) -> Result<SolverResult> {
    config.validate()?;
    let grid = Arc::clone(spec.grid());
    if !Arc::ptr_eq(&grid, initial.grid()) {
        return Err(Error::Config("initial guess lives on a different grid".into()));
    }
    let tol = config
        .newton_tol
        .unwrap_or_else(|| spec.default_tolerance());

    let mut u = GridFunction::zeros(&grid);
    {
        let vals = u.values_mut();
        for k in grid.active_nodes() {
            vals[k] = if grid.is_boundary(k) {
                spec.dirichlet.value(k)
            } else {
                initial.value(k)
            };
        }
    }

    let mut asm = Assembler::new(&grid);
    let ndof = asm.node_of.len();
    let cg_max = (10 * ndof).max(100);
    let mut energy_history = Vec::new();
    let mut stages = Vec::new();
    let mut newton_iters_total = 0;
    let mut residual_sup = f64::INFINITY;
    let mut rhs = vec![0.0; ndof];
    let mut step = vec![0.0; ndof];

    for eps in config.eps_schedule() {
        let history_start = energy_history.len();
        let mut e_cur = energy_value(&u, spec, eps);
        check_finite(e_cur, eps)?;
        energy_history.push(e_cur);
        let mut iterations = 0;
        let mut converged = false;

        loop {
            let r = residual(&u, spec, eps);
            residual_sup = asm
                .node_of
                .iter()
                .map(|&k| r.value(k).abs())
                .fold(0.0, f64::max);
            if !residual_sup.is_finite() {
                return Err(Error::NumericalBreakdown(format!(
                    "non-finite residual at eps = {eps:e}"
                )));
            }
            if residual_sup <= tol {
                converged = true;
                break;
            }
            if iterations == config.max_newton {
                break;
            }
            iterations += 1;

            asm.assemble_hessian(&u, spec, eps);
            for (i, &k) in asm.node_of.iter().enumerate() {
                rhs[i] = -r.value(k);
            }
            pcg(&asm.hessian, &rhs, &mut step, config.cg_rel_tol, cg_max);
            let mut slope: f64 = asm
                .node_of
                .iter()
                .enumerate()
                .map(|(i, &k)| r.value(k) * step[i])
                .sum();
            if !(slope < 0.0) {
                // Fall back to steepest descent.
                step.copy_from_slice(&rhs);
                slope = -rhs.iter().map(|v| v * v).sum::<f64>();
            }
            let du = displaced(&GridFunction::zeros(&grid), &asm.node_of, &step, 1.0);

            let mut t = 1.0;
            let accepted = loop {
                let (delta, scale) = energy_change(&u, &du, t, spec, eps);
                check_finite(delta, eps)?;
                if delta <= config.armijo_c * t * slope {
                    break Some(t);
                }
                // Below this level the change is rounding noise and the full
                // Newton step is the best information left.
                let slack = 64.0 * f64::EPSILON * scale;
                if t == 1.0 && -slope <= slack && delta <= slack {
                    break Some(t);
                }
                t *= config.armijo_shrink;
                if t < 1e-12 {
                    break None;
                }
            };
            match accepted {
                Some(t) => {
                    u = displaced(&u, &asm.node_of, &step, t);
                    e_cur = energy_value(&u, spec, eps);
                    check_finite(e_cur, eps)?;
                    energy_history.push(e_cur);
                }
                None => break,
            }
        }

        newton_iters_total += iterations;
        stages.push(StageReport {
            eps,
            iterations,
            residual_sup,
            converged,
            history_start,
            history_len: energy_history.len() - history_start,
        });
    }

    let last = stages.last().expect("schedule is never empty");
    Ok(SolverResult {
        // A stage that hit its cap is reported even if later stages recovered.
        converged: stages.iter().all(|s| s.converged),
        eps_final: last.eps,
        residual_sup,
        newton_tol: tol,
        u,
        energy_history,
        stages,
        newton_iters_total,
    })
}

fn displaced(u: &GridFunction, node_of: &[usize], step: &[f64], t: f64) -> GridFunction {
    let mut out = u.clone();
    let vals = out.values_mut();
    for (i, &k) in node_of.iter().enumerate() {
        vals[k] += t * step[i];
    }
    out
}

fn check_finite(e: f64, eps: f64) -> Result<()> {
    if e.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalBreakdown(format!(
            "non-finite energy at eps = {eps:e}"
        )))
    }
}

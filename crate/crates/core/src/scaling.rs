//! Normalization and blow-up maps between solutions.
//!
//! Every transform has the form `v(x) = (u(x0 + s x) - a) / b` for a spatial
//! factor `s`, an offset `a` and an amplitude divisor `b`, resampled onto the
//! source grid by P1 interpolation. The matching source term is
//! `f̃(x) = (s^p / b^(p-1)) f(x0 + s x)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exponents::{conjugate, identity_defect};
use crate::grid::{recover_gradient, GridFunction};

/// Tolerance for the exponent identities and the normalization claim.
pub const ALGEBRA_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    Theta,
    Lambda,
    Mu,
}

impl FromStr for ScalingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Self::Theta),
            "lambda" => Ok(Self::Lambda),
            "mu" => Ok(Self::Mu),
            other => Err(Error::Parse(format!(
                "unknown scaling kind `{other}` (expected theta, lambda or mu)"
            ))),
        }
    }
}

impl fmt::Display for ScalingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Theta => "theta",
            Self::Lambda => "lambda",
            Self::Mu => "mu",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRecord {
    pub kind: ScalingKind,
    pub p: f64,
    /// Spatial factor `s`.
    pub factor: f64,
    /// Amplitude divisor `b`.
    pub value_scale: f64,
    /// Subtracted value `a`, i.e. `u(x0)` or zero.
    pub value_offset: f64,
    pub source_node: usize,
    pub source_point: [f64; 2],
    /// Recovered `|∇u(x0)|` (zero for the θ map, which does not use it).
    pub grad_norm: f64,
    /// Multiplier `s^p / b^(p-1)` carried by the source term.
    pub rhs_factor: f64,
    /// Bound the transform promises for `‖f̃‖∞` (θ) or for `rhs_factor` (λ, μ).
    pub claimed_rhs_bound: f64,
    /// Largest deviation of the conjugate-exponent identities.
    pub identity_defect: f64,
    /// `‖v‖∞` of the resampled field.
    pub output_sup: f64,
}

impl ScalingRecord {
    fn new(kind: ScalingKind, p: f64, u: &GridFunction, x0: usize) -> Result<Self> {
        let defect = identity_defect(p)?;
        if defect > ALGEBRA_TOL {
            return Err(Error::NumericalBreakdown(format!(
                "exponent identities violated by {defect:e} at p = {p}"
            )));
        }
        Ok(Self {
            kind,
            p,
            factor: 1.0,
            value_scale: 1.0,
            value_offset: 0.0,
            source_node: x0,
            source_point: u.grid().node(x0),
            grad_norm: 0.0,
            rhs_factor: 1.0,
            claimed_rhs_bound: 1.0,
            identity_defect: defect,
            output_sup: 0.0,
        })
    }

    /// Source-grid point that feeds the output node at `x`.
    pub fn source_of(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.source_point[0] + self.factor * x[0],
            self.source_point[1] + self.factor * x[1],
        ]
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(domain("scaling maps need a finite p > 1", p));
    }
    Ok(())
}

fn check_node(u: &GridFunction, x0: usize) -> Result<()> {
    let grid = u.grid();
    if x0 >= grid.num_nodes() || !grid.is_active(x0) {
        return Err(Error::NodeLookup(format!("base node {x0} is not an active node")));
    }
    Ok(())
}

/// Samples `(g(x0 + s x) - a) / b` at every active node, failing when a source
/// point leaves the domain.
fn resample(g: &GridFunction, rec: &ScalingRecord) -> Result<GridFunction> {
    let grid = g.grid();
    let mut values = vec![0.0; grid.num_nodes()];
    for k in grid.active_nodes() {
        let src = rec.source_of(grid.node(k));
        let raw = g.interpolate(src).map_err(|_| {
            Error::OutOfDomain(format!(
                "{} map needs u at ({:.6}, {:.6}), outside the domain (factor {}, base ({}, {}))",
                rec.kind, src[0], src[1], rec.factor, rec.source_point[0], rec.source_point[1]
            ))
        })?;
        values[k] = (raw - rec.value_offset) / rec.value_scale;
    }
    GridFunction::from_values(grid, values)
}

fn grad_at(u: &GridFunction, x0: usize) -> f64 {
    recover_gradient(u).norm(x0)
}

/// θ-normalization about the origin: `v(x) = u(θx)/‖u‖∞`,
/// `f̃(x) = θ^p f(θx) / ‖u‖∞^(p-1)` with `θ = (δ0 ‖u‖∞^(p-1) / ‖f‖∞)^(1/p)`.
pub fn theta_normalize(
    u: &GridFunction,
    f: &GridFunction,
    p: f64,
    delta0: f64,
) -> Result<(GridFunction, GridFunction, ScalingRecord)> {
    check_p(p)?;
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(domain("delta0 must be positive", delta0));
    }
    let grid = u.grid();
    if !std::sync::Arc::ptr_eq(grid, f.grid()) {
        return Err(Error::Config("u and f live on different grids".into()));
    }
    let u_sup = u.sup_norm();
    let f_sup = f.sup_norm();
    if u_sup == 0.0 {
        return Err(Error::DegenerateInput("theta normalization needs u ≠ 0".into()));
    }
    if f_sup == 0.0 {
        return Err(Error::DegenerateInput("theta normalization needs f ≠ 0".into()));
    }
    let theta = (delta0 * u_sup.powf(p - 1.0) / f_sup).powf(1.0 / p);
    if theta > 1.0 {
        let admissible = f_sup / u_sup.powf(p - 1.0);
        return Err(Error::OutOfDomain(format!(
            "theta = {theta} > 1 would resample outside the unit ball; admissible delta0 range is (0, {admissible}]"
        )));
    }
    let mut rec = ScalingRecord::new(ScalingKind::Theta, p, u, grid.origin())?;
    rec.factor = theta;
    rec.value_scale = u_sup;
    rec.rhs_factor = theta.powf(p) / u_sup.powf(p - 1.0);
    rec.claimed_rhs_bound = delta0;

    let sampled_sup = rec.rhs_factor * f_sup;
    if (sampled_sup - delta0).abs() > ALGEBRA_TOL * delta0 {
        return Err(Error::NumericalBreakdown(format!(
            "normalized source sup {sampled_sup} differs from delta0 = {delta0}"
        )));
    }
    let v = resample(u, &rec)?;
    let f_rec = ScalingRecord {
        value_scale: 1.0 / rec.rhs_factor,
        ..rec.clone()
    };
    let f_tilde = resample(f, &f_rec)?;
    rec.output_sup = v.sup_norm();
    Ok((v, f_tilde, rec))
}

/// λ0-rescale about `x0`: `v(x) = (u(x0 + λ0 x) - u(x0)) / (λ0^p' + |∇u(x0)| λ0)`.
pub fn lambda_rescale(u: &GridFunction, x0: usize, lambda0: f64, p: f64) -> Result<(GridFunction, ScalingRecord)> {
    check_p(p)?;
    check_node(u, x0)?;
    if !(lambda0 > 0.0 && lambda0 < 0.5) {
        return Err(domain("lambda0 must lie in (0, 1/2)", lambda0));
    }
    let q = conjugate(p)?;
    let g = grad_at(u, x0);
    let denom = lambda0.powf(q) + g * lambda0;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "lambda rescale denominator {denom} is not positive"
        )));
    }
    let mut rec = ScalingRecord::new(ScalingKind::Lambda, p, u, x0)?;
    rec.factor = lambda0;
    rec.value_scale = denom;
    rec.value_offset = u.value(x0);
    rec.grad_norm = g;
    rec.rhs_factor = lambda0.powf(p) / denom.powf(p - 1.0);
    rec.claimed_rhs_bound = 1.0;
    if rec.rhs_factor > 1.0 + ALGEBRA_TOL {
        return Err(Error::NumericalBreakdown(format!(
            "lambda damping factor {} exceeds 1",
            rec.rhs_factor
        )));
    }
    let v = resample(u, &rec)?;
    rec.output_sup = v.sup_norm();
    Ok((v, rec))
}

/// μ-rescale about a nondegenerate `x0`: `μ = |∇u(x0)|^(p-1)`,
/// `w(x) = (u(x0 + μ x) - u(x0)) / μ^p'`.
pub fn mu_rescale(u: &GridFunction, x0: usize, p: f64) -> Result<(GridFunction, ScalingRecord)> {
    check_p(p)?;
    check_node(u, x0)?;
    let q = conjugate(p)?;
    let g = grad_at(u, x0);
    if !(g > 0.0) {
        let [x, y] = u.grid().node(x0);
        return Err(Error::CriticalPoint(format!(
            "recovered gradient vanishes at ({x}, {y}); the mu map is undefined"
        )));
    }
    let mu = g.powf(p - 1.0);
    let mut rec = ScalingRecord::new(ScalingKind::Mu, p, u, x0)?;
    rec.factor = mu;
    rec.value_scale = mu.powf(q);
    rec.value_offset = u.value(x0);
    rec.grad_norm = g;
    rec.rhs_factor = mu.powf(p) / rec.value_scale.powf(p - 1.0);
    rec.claimed_rhs_bound = 1.0;
    let w = resample(u, &rec).map_err(|e| match e {
        Error::OutOfDomain(msg) => Error::OutOfDomain(format!("ball of radius mu = {mu} leaves the domain: {msg}")),
        other => other,
    })?;
    rec.output_sup = w.sup_norm();
    Ok((w, rec))
}

/// Undoes a transform on the grid of `v`: `u(y) = a + b v((y - x0)/s)`.
///
/// Nodes whose preimage leaves the domain are reported as `false` in the mask
/// and hold zero.
pub fn unscale(v: &GridFunction, rec: &ScalingRecord) -> Result<(GridFunction, Vec<bool>)> {
    let grid = v.grid();
    let mut values = vec![0.0; grid.num_nodes()];
    let mut mask = vec![false; grid.num_nodes()];
    for k in grid.active_nodes() {
        let [y0, y1] = grid.node(k);
        let pre = [
            (y0 - rec.source_point[0]) / rec.factor,
            (y1 - rec.source_point[1]) / rec.factor,
        ];
        if let Ok(val) = v.interpolate(pre) {
            values[k] = rec.value_offset + rec.value_scale * val;
            mask[k] = true;
        }
    }
    Ok((GridFunction::from_values(grid, values)?, mask))
}

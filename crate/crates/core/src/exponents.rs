//! Closed-form exponents attached to a power `p`.
//!
//! Everything here is a pure function of `p` (and the dimension for the
//! radial constant). The chain `alpha_star > alpha_bk > 1/(p-1)` is what
//! makes the sharp gradient estimate reachable for planar p-harmonic
//! functions; [`exponent_chain`] checks it numerically.

use serde::Serialize;

use crate::error::{domain, Result};

/// Safety factor applied to the corrector-regularity margin so that the
/// returned value sits strictly inside its open window.
const TAU0_SHRINK: f64 = 1.0 - 1e-9;

/// Conjugate exponent `p' = p / (p - 1)`.
pub fn conjugate(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(domain("conjugate exponent needs p > 1", p));
    }
    Ok(p / (p - 1.0))
}

/// Critical Hölder exponent of the gradient, `1/(p-1) = p' - 1`.
pub fn alpha_crit(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(domain("critical exponent needs p > 1", p));
    }
    Ok(1.0 / (p - 1.0))
}

fn check_formula_range(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(domain("exponent formula needs p >= 2", p));
    }
    Ok(())
}

/// Optimal gradient Hölder exponent of planar p-harmonic functions.
///
/// `(1/6) * (p/(p-1) + sqrt(1 + 14/(p-1) + 1/(p-1)^2))`. Equals 1 at `p = 2`
/// and decreases to 1/3 as `p` grows.
pub fn alpha_star(p: f64) -> Result<f64> {
    check_formula_range(p)?;
    let q = 1.0 / (p - 1.0);
    Ok((p * q + (1.0 + 14.0 * q + q * q).sqrt()) / 6.0)
}

/// Hölder exponent delivered by the quasiregular gradient-mapping estimate.
///
/// `(1/(2p)) * (-3 - 1/(p-1) + sqrt(33 + 30/(p-1) + 1/(p-1)^2))`.
pub fn alpha_bk(p: f64) -> Result<f64> {
    check_formula_range(p)?;
    let q = 1.0 / (p - 1.0);
    Ok((-3.0 - q + (33.0 + 30.0 * q + q * q).sqrt()) / (2.0 * p))
}

/// Largest corrector-regularity margin compatible with both
/// `tau0 < (p-2)/(p-1)` and `1/(p-1) + tau0 <= alpha_bk(p)`.
pub fn tau0(p: f64) -> Result<f64> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(domain("tau0 needs p > 2", p));
    }
    let window = (p - 2.0) / (p - 1.0);
    let gap = alpha_bk(p)? - alpha_crit(p)?;
    Ok(gap.min(window) * TAU0_SHRINK)
}

/// Constant `c` with `-Δ_p (c (1 - |x|^{p'})) = 1` on the unit ball of `R^d`.
pub fn radial_constant(d: u32, p: f64) -> Result<f64> {
    if d < 2 {
        return Err(domain("radial constant needs dimension d >= 2", d as f64));
    }
    if !(p > 2.0) || !p.is_finite() {
        return Err(domain("radial constant needs p > 2", p));
    }
    Ok((d as f64).powf(-1.0 / (p - 1.0)) * (p - 1.0) / p)
}

/// Outcome of checking `alpha_star > alpha_bk > 1/(p-1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub p: f64,
    pub alpha_star: f64,
    pub alpha_bk: f64,
    pub alpha_crit: f64,
    /// `alpha_star - alpha_bk`
    pub upper_margin: f64,
    /// `alpha_bk - 1/(p-1)`
    pub lower_margin: f64,
    pub pass: bool,
}

pub fn exponent_chain(p: f64) -> Result<ChainReport> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(domain("exponent chain needs p > 2", p));
    }
    let alpha_star = alpha_star(p)?;
    let alpha_bk = alpha_bk(p)?;
    let alpha_crit = alpha_crit(p)?;
    let upper_margin = alpha_star - alpha_bk;
    let lower_margin = alpha_bk - alpha_crit;
    Ok(ChainReport {
        p,
        alpha_star,
        alpha_bk,
        alpha_crit,
        upper_margin,
        lower_margin,
        pass: upper_margin > 0.0 && lower_margin > 0.0,
    })
}

/// All exponents and constants attached to a single `p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentSet {
    pub p: f64,
    pub p_conj: f64,
    pub alpha_star: f64,
    pub alpha_bk: f64,
    pub alpha_crit: f64,
    /// `None` at `p = 2`, where the margin window is empty.
    pub tau0: Option<f64>,
    /// Radial extremal constant in two dimensions; `None` at `p = 2`.
    pub c_radial: Option<f64>,
}

impl ExponentSet {
    /// Evaluates every exponent for `p >= 2`.
    pub fn new(p: f64) -> Result<Self> {
        check_formula_range(p)?;
        let (tau0, c_radial) = if p > 2.0 {
            (Some(tau0(p)?), Some(radial_constant(2, p)?))
        } else {
            (None, None)
        };
        Ok(Self {
            p,
            p_conj: conjugate(p)?,
            alpha_star: alpha_star(p)?,
            alpha_bk: alpha_bk(p)?,
            alpha_crit: alpha_crit(p)?,
            tau0,
            c_radial,
        })
    }

    /// Whether the strict chain holds (always false at `p = 2`).
    pub fn chain_pass(&self) -> bool {
        self.p > 2.0 && self.alpha_star > self.alpha_bk && self.alpha_bk > self.alpha_crit
    }
}

/// Largest deviation of the two conjugate-exponent identities
/// `p + p' = p p'` and `p' (p - 1) = p` from zero, relative to `p`.
pub fn identity_defect(p: f64) -> Result<f64> {
    let q = conjugate(p)?;
    let sum_product = (p + q - p * q).abs() / p;
    let scaling = (q * (p - 1.0) - p).abs() / p;
    let shift = ((q - 1.0) - 1.0 / (p - 1.0)).abs();
    Ok(sum_product.max(scaling).max(shift))
}

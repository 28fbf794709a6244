//! Oscillation profiles around a base point and the growth rates fitted to them.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::exponents::conjugate;
use crate::grid::{recover_gradient, sup_ball, GridFunction, SupMode, GEOM_TOL};

/// Oscillation values below this are treated as zero when fitting.
pub const FLAT_THRESHOLD: f64 = 1e-13;

#[derive(Clone, Debug, Serialize)]
pub struct OscillationProfile {
    pub x0: usize,
    pub x0_coords: [f64; 2],
    pub grad0: [f64; 2],
    /// Decreasing radii `r_max ratio^k`.
    pub radii: Vec<f64>,
    /// `sup_{B_r} |u - u(x0)|`
    pub osc_centered: Vec<f64>,
    /// `sup_{B_r} |u - u(x0) - grad0 . (x - x0)|`
    pub osc_linear: Vec<f64>,
}

impl OscillationProfile {
    pub fn grad_norm(&self) -> f64 {
        self.grad0[0].hypot(self.grad0[1])
    }

    /// Largest violation of the two triangle inequalities linking the
    /// centered and linearly corrected oscillations (non-positive when they hold).
    pub fn triangle_defect(&self) -> f64 {
        let g = self.grad_norm();
        self.radii
            .iter()
            .zip(self.osc_centered.iter().zip(&self.osc_linear))
            .map(|(&r, (&c, &l))| {
                let slack = 1e-12 * (1.0 + c + l + g * r);
                (l - c - g * r).max(c - l - g * r) - slack
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Centered,
    LinearCorrected,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub radii_used: Vec<f64>,
}

/// Dyadic-style oscillation profile around node `x0`.
pub fn profile(
    u: &GridFunction,
    x0: usize,
    r_max: f64,
    levels: usize,
    ratio: f64,
) -> Result<OscillationProfile> {
    let grid = u.grid();
    if levels < 3 {
        return Err(Error::Config(format!("levels must be >= 3, got {levels}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(domain("ratio must lie in (0, 1)", ratio));
    }
    if x0 >= grid.num_nodes() || !grid.is_active(x0) {
        return Err(Error::NodeLookup(format!("base node {x0} is not active")));
    }
    let floor = grid.min_ball_radius();
    let smallest = r_max * ratio.powi(levels as i32 - 1);
    if smallest < floor * (1.0 - GEOM_TOL) {
        let usable = if r_max >= floor {
            1 + ((floor / r_max).ln() / ratio.ln() + 1e-9).floor() as usize
        } else {
            0
        };
        return Err(Error::InsufficientResolution(format!(
            "smallest radius {smallest:e} is below the resolution floor {floor:e}; at most {usable} levels are usable"
        )));
    }
    let grad0 = recover_gradient(u).value(x0);
    let radii: Vec<f64> = (0..levels).map(|k| r_max * ratio.powi(k as i32)).collect();
    let mut osc_centered = Vec::with_capacity(levels);
    let mut osc_linear = Vec::with_capacity(levels);
    for &r in &radii {
        osc_centered.push(sup_ball(u, x0, r, SupMode::Centered)?);
        osc_linear.push(sup_ball(u, x0, r, SupMode::LinearCorrected(grad0))?);
    }
    Ok(OscillationProfile {
        x0,
        x0_coords: grid.node(x0),
        grad0,
        radii,
        osc_centered,
        osc_linear,
    })
}

/// Least-squares slope of `log osc` against `log r`.
pub fn fit_exponent(profile: &OscillationProfile, which: Which) -> Result<ExponentFit> {
    let osc = match which {
        Which::Centered => &profile.osc_centered,
        Which::LinearCorrected => &profile.osc_linear,
    };
    let pts: Vec<(f64, f64)> = profile
        .radii
        .iter()
        .zip(osc)
        .filter(|(_, &o)| o > FLAT_THRESHOLD)
        .map(|(&r, &o)| (r, o))
        .collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateProfile {
            positive: pts.len(),
            total: profile.radii.len(),
        });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(ExponentFit {
        slope,
        intercept,
        r_squared,
        radii_used: pts.iter().map(|p| p.0).collect(),
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r_squared)
}

/// Right-hand side `r^{p'} (1 + |g| r^{1/(1-p)})` of the critical-set oscillation
/// bound with unit constant. Evaluated as `r^{p'} + |g| r`, its exact equivalent.
pub fn bound_rhs(r: f64, grad_norm: f64, p: f64) -> Result<f64> {
    let q = conjugate(p)?;
    Ok(r.powf(q) + grad_norm * r)
}

/// Smallest `C` with `osc_centered(r_k) <= C r_k^{p'} (1 + |grad0| r_k^{1/(1-p)})`
/// at every radius of the profile.
pub fn crack_bound_constant(profile: &OscillationProfile, p: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(domain("oscillation bound needs p > 2", p));
    }
    let g = profile.grad_norm();
    let mut c: f64 = 0.0;
    for (&r, &osc) in profile.radii.iter().zip(&profile.osc_centered) {
        c = c.max(osc / bound_rhs(r, g, p)?);
    }
    Ok(c)
}

fn check_lambda0(lambda0: f64) -> Result<()> {
    if !(lambda0 > 0.0 && lambda0 < 0.5) {
        return Err(domain("lambda0 must lie in (0, 1/2)", lambda0));
    }
    Ok(())
}

/// Closed form of the dyadic bound on `sup_{B_{lambda0^k}} |u - u(0)|`:
///
/// `lambda0^{k p'} + g lambda0^k (1 - lambda0^{(p'-1) k}) / (1 - lambda0^{p'-1})`.
pub fn iteration_bound(k: u32, lambda0: f64, g: f64, p: f64) -> Result<f64> {
    check_lambda0(lambda0)?;
    if !(g >= 0.0) {
        return Err(domain("gradient magnitude must be non-negative", g));
    }
    if !(p > 2.0) {
        return Err(domain("iteration bound needs p > 2", p));
    }
    let q = conjugate(p)?;
    let k = k as f64;
    let rho = lambda0.powf(q - 1.0);
    let geometric = -(k * (q - 1.0) * lambda0.ln()).exp_m1() / (1.0 - rho);
    Ok(lambda0.powf(k * q) + g * lambda0.powf(k) * geometric)
}

/// Partial geometric factor `sum_{i<k} (lambda0^{p'-1})^i` in closed form.
pub fn partial_sum_factor(k: u32, lambda0: f64, p: f64) -> Result<f64> {
    check_lambda0(lambda0)?;
    let q = conjugate(p)?;
    let rho = lambda0.powf(q - 1.0);
    Ok(-(k as f64 * (q - 1.0) * lambda0.ln()).exp_m1() / (1.0 - rho))
}

/// Tail-free form of [`iteration_bound`]: `lambda0^{k p'} + g lambda0^k / (1 - lambda0^{p'-1})`.
pub fn iteration_bound_limit(k: u32, lambda0: f64, g: f64, p: f64) -> Result<f64> {
    check_lambda0(lambda0)?;
    let q = conjugate(p)?;
    let k = k as f64;
    Ok(lambda0.powf(k * q) + g * lambda0.powf(k) / (1.0 - lambda0.powf(q - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Critical,
    Nondegenerate,
}

/// Nondegenerate iff `|grad| > r^{1/(p-1)}`.
pub fn classify(grad_norm: f64, r: f64, p: f64) -> PointClass {
    if grad_norm > r.powf(1.0 / (p - 1.0)) {
        PointClass::Nondegenerate
    } else {
        PointClass::Critical
    }
}

/// Classifies node `x0` at scale `r` using the recovered gradient.
pub fn classify_point(u: &GridFunction, x0: usize, r: f64, p: f64) -> Result<PointClass> {
    let grid = u.grid();
    if x0 >= grid.num_nodes() || !grid.is_active(x0) {
        return Err(Error::NodeLookup(format!("base node {x0} is not active")));
    }
    let g = recover_gradient(u).norm(x0);
    Ok(classify(g, r, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_abs_diff_eq;

    fn synthetic(radii: Vec<f64>, osc: Vec<f64>) -> OscillationProfile {
        OscillationProfile {
            x0: 0,
            x0_coords: [0.0; 2],
            grad0: [0.0; 2],
            osc_linear: osc.clone(),
            osc_centered: osc,
            radii,
        }
    }

    #[test]
    fn fit_exact_power_laws() {
        let radii: Vec<f64> = (0..5).map(|k| 0.25 * 0.5f64.powi(k)).collect();
        let p = synthetic(radii.clone(), radii.iter().map(|r| r.powf(1.5)).collect());
        let fit = fit_exponent(&p, Which::Centered).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);

        let p = synthetic(radii.clone(), radii.iter().map(|r| 2.0 * r).collect());
        let fit = fit_exponent(&p, Which::Centered).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.intercept, 2f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn fit_trims_flat_entries() {
        let radii: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).collect();
        let mut osc: Vec<f64> = radii.iter().map(|r| r * r).collect();
        osc[4] = 0.0;
        let fit = fit_exponent(&synthetic(radii.clone(), osc), Which::Centered).unwrap();
        assert_eq!(fit.radii_used.len(), 4);
        let osc = vec![1.0, 0.5, 0.0, 0.0, 0.0];
        assert!(matches!(
            fit_exponent(&synthetic(radii, osc), Which::Centered),
            Err(Error::DegenerateProfile { positive: 2, total: 5 })
        ));
    }

    #[test]
    fn profile_of_affine_and_constant_fields() {
        let grid = build_grid(64, false).unwrap();
        let aff = GridFunction::from_fn(&grid, |x, y| 0.2 + 0.6 * x - 0.8 * y);
        let pr = profile(&aff, grid.origin(), 0.5, 4, 0.5).unwrap();
        for (&r, (&c, &l)) in pr.radii.iter().zip(pr.osc_centered.iter().zip(&pr.osc_linear)) {
            assert!(l <= 1e-12);
            // |g| = 1; the sup is attained at a node close to the gradient direction
            assert!(c <= r + 1e-12 && c >= r - grid.h());
        }
        let c = GridFunction::from_fn(&grid, |_, _| 3.0);
        let pr = profile(&c, grid.origin(), 0.5, 4, 0.5).unwrap();
        assert!(pr.osc_centered.iter().chain(&pr.osc_linear).all(|&v| v == 0.0));
        assert!(fit_exponent(&pr, Which::Centered).is_err());
    }

    #[test]
    fn profile_resolution_floor_names_usable_levels() {
        let grid = build_grid(32, false).unwrap();
        let u = GridFunction::zeros(&grid);
        let err = profile(&u, grid.origin(), 0.5, 6, 0.5).unwrap_err();
        match err {
            Error::InsufficientResolution(msg) => assert!(msg.contains("at most 4 levels")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn power_field_profile_at_origin() {
        let grid = build_grid(64, false).unwrap();
        let u = GridFunction::from_fn(&grid, |x, y| x.hypot(y).powf(1.5));
        let pr = profile(&u, grid.origin(), 0.5, 4, 0.5).unwrap();
        for (&r, &c) in pr.radii.iter().zip(&pr.osc_centered) {
            assert_abs_diff_eq!(c, r.powf(1.5), epsilon = 1e-14);
        }
        let c = crack_bound_constant(&pr, 3.0).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crack_constant_on_affine_field_is_at_most_one() {
        let grid = build_grid(64, false).unwrap();
        let u = GridFunction::from_fn(&grid, |x, y| 0.3 * x + 0.4 * y);
        let pr = profile(&u, grid.origin(), 0.5, 4, 0.5).unwrap();
        let c = crack_bound_constant(&pr, 3.0).unwrap();
        assert!(c > 0.0 && c <= 1.0);
    }

    #[test]
    fn iteration_bound_examples() {
        assert_abs_diff_eq!(iteration_bound(0, 0.25, 5.0, 3.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(iteration_bound(1, 0.25, 1.0, 3.0).unwrap(), 0.375, epsilon = 1e-15);
        assert!(iteration_bound(1, 0.5, 1.0, 3.0).is_err());
        assert!(iteration_bound(1, 0.0, 1.0, 3.0).is_err());
        assert!(iteration_bound(3, 0.25, 1.0, 3.0).unwrap() <= iteration_bound_limit(3, 0.25, 1.0, 3.0).unwrap());
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(0.0, 0.25, 3.0), PointClass::Critical);
        assert_eq!(classify(0.0, 1e-9, 3.0), PointClass::Critical);
        assert_eq!(classify(1.0, 0.25, 3.0), PointClass::Nondegenerate);
        assert_eq!(classify(0.4, 0.25, 3.0), PointClass::Critical);
    }
}

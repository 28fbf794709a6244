//! Complex-gradient checks for planar p-harmonic functions.
//!
//! For `u` p-harmonic, `φ = u_z = (u_x - i u_y) / 2` is a quasiregular gradient
//! mapping: `|φ_z̄| <= (1 - 2/p) |φ_z|`, `Im φ_z̄ = 0` and `φ_z̄ = Δu / 4`.
//! The routines here evaluate those relations on discrete fields with central
//! differences on the lattice, and the Morrey-type decay of `∫_{B_r} |∇φ|²`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::exponents::alpha_bk;
use crate::grid::{recover_gradient, Grid, GridFunction, GEOM_TOL};

/// Default `|∇u|` threshold below which pointwise checks are skipped.
pub const DEFAULT_GRAD_THRESHOLD: f64 = 0.1;

/// Nodal complex field with optional Wirtinger derivatives.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Arc<Grid>,
    phi: Vec<Complex64>,
    valid_mask: Vec<bool>,
    dx: Option<Vec<Complex64>>,
    dy: Option<Vec<Complex64>>,
    phi_z: Option<Vec<Complex64>>,
    phi_zbar: Option<Vec<Complex64>>,
}

impl ComplexField {
    /// `reliable` marks nodes whose value may feed a difference stencil.
    fn with_reliable(grid: &Arc<Grid>, phi: Vec<Complex64>, reliable: Vec<bool>) -> Self {
        let valid_mask = (0..grid.num_nodes())
            .map(|k| reliable[k] && axis_neighbors(grid, k, 1).is_some_and(|nb| nb.iter().all(|&m| reliable[m])))
            .collect();
        Self {
            grid: Arc::clone(grid),
            phi,
            valid_mask,
            dx: None,
            dy: None,
            phi_z: None,
            phi_zbar: None,
        }
    }

    /// Samples an analytic complex map at every active lattice node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(Complex64) -> Complex64) -> Self {
        let phi = (0..grid.num_nodes())
            .map(|k| {
                if grid.is_active(k) {
                    let [x, y] = grid.node(k);
                    f(Complex64::new(x, y))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let reliable = (0..grid.num_nodes())
            .map(|k| grid.is_active(k) && !grid.is_moved(k))
            .collect();
        Self::with_reliable(grid, phi, reliable)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn phi(&self) -> &[Complex64] {
        &self.phi
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid_mask
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.valid_mask[k]
    }

    pub fn phi_z(&self) -> Option<&[Complex64]> {
        self.phi_z.as_deref()
    }

    pub fn phi_zbar(&self) -> Option<&[Complex64]> {
        self.phi_zbar.as_deref()
    }

    /// Central-difference partials `(∂x φ, ∂y φ)`, once [`wirtinger`] ran.
    pub fn partials(&self) -> Option<(&[Complex64], &[Complex64])> {
        Some((self.dx.as_deref()?, self.dy.as_deref()?))
    }

    fn derivatives(&self) -> Result<(&[Complex64], &[Complex64])> {
        match (&self.phi_z, &self.phi_zbar) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::Config(
                "Wirtinger derivatives not computed; call `wirtinger` first".into(),
            )),
        }
    }
}

/// Lattice neighbours `[east, west, north, south]` at distance `step`, when all
/// are active nodes at their lattice positions.
fn axis_neighbors(grid: &Grid, k: usize, step: usize) -> Option<[usize; 4]> {
    let (i, j) = grid.lattice(k);
    let n = grid.n();
    if i < step || j < step || i + step > n || j + step > n {
        return None;
    }
    let nb = [
        grid.index(i + step, j),
        grid.index(i - step, j),
        grid.index(i, j + step),
        grid.index(i, j - step),
    ];
    nb.iter()
        .all(|&m| grid.is_active(m) && !grid.is_moved(m))
        .then_some(nb)
}

/// `φ = (u_x - i u_y) / 2` from the recovered gradient of `u`.
///
/// Only nodes with a complete triangle star are used as stencil inputs; the
/// recovered gradient is one order less accurate on the boundary layer.
pub fn complex_gradient(u: &GridFunction) -> ComplexField {
    let grid = u.grid();
    let grad = recover_gradient(u);
    let phi = grad
        .values()
        .iter()
        .map(|&[gx, gy]| Complex64::new(0.5 * gx, -0.5 * gy))
        .collect();
    let reliable = (0..grid.num_nodes()).map(|k| grid.is_interior(k)).collect();
    ComplexField::with_reliable(grid, phi, reliable)
}

/// Fills `∂/∂z = (∂x - i ∂y)/2` and `∂/∂z̄ = (∂x + i ∂y)/2` on the valid mask.
pub fn wirtinger(field: &ComplexField) -> ComplexField {
    let grid = &field.grid;
    let h = grid.h();
    let zero = Complex64::new(0.0, 0.0);
    let i_unit = Complex64::new(0.0, 1.0);
    let nn = grid.num_nodes();
    let (mut dx, mut dy) = (vec![zero; nn], vec![zero; nn]);
    let (mut phi_z, mut phi_zbar) = (vec![zero; nn], vec![zero; nn]);
    for k in 0..nn {
        if !field.valid_mask[k] {
            continue;
        }
        let [e, w, n, s] = axis_neighbors(grid, k, 1).expect("valid nodes have a full stencil");
        let ddx = (field.phi[e] - field.phi[w]) / (2.0 * h);
        let ddy = (field.phi[n] - field.phi[s]) / (2.0 * h);
        dx[k] = ddx;
        dy[k] = ddy;
        phi_z[k] = 0.5 * (ddx - i_unit * ddy);
        phi_zbar[k] = 0.5 * (ddx + i_unit * ddy);
    }
    ComplexField {
        dx: Some(dx),
        dy: Some(dy),
        phi_z: Some(phi_z),
        phi_zbar: Some(phi_zbar),
        ..field.clone()
    }
}

/// Per-node scalar check together with the nodes where it is defined.
#[derive(Clone, Debug)]
pub struct NodalCheck {
    pub values: GridFunction,
    pub mask: Vec<bool>,
}

impl NodalCheck {
    /// Keeps only the masked nodes for which `keep` holds.
    pub fn restrict(&self, keep: &[bool]) -> NodalCheck {
        NodalCheck {
            values: self.values.clone(),
            mask: self.mask.iter().zip(keep).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    fn masked(&self) -> impl Iterator<Item = f64> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(k, _)| self.values.value(k))
    }

    /// `max(0, max value)` over the mask.
    pub fn positive_sup(&self) -> f64 {
        self.masked().fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.masked().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Empirical quantile (nearest rank) of the masked values.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut v: Vec<f64> = self.masked().collect();
        if v.is_empty() {
            return f64::NAN;
        }
        v.sort_by(f64::total_cmp);
        let idx = ((q.clamp(0.0, 1.0) * (v.len() - 1) as f64).round()) as usize;
        v[idx]
    }
}

fn nodal_check(
    field: &ComplexField,
    f: impl Fn(Complex64, Complex64) -> f64,
) -> Result<NodalCheck> {
    let (a, b) = field.derivatives()?;
    let values: Vec<f64> = (0..field.grid.num_nodes())
        .map(|k| if field.valid_mask[k] { f(a[k], b[k]) } else { 0.0 })
        .collect();
    Ok(NodalCheck {
        values: GridFunction::from_values(&field.grid, values)?,
        mask: field.valid_mask.clone(),
    })
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(domain("quasiregular checks need p >= 2", p));
    }
    Ok(())
}

/// `|φ_z̄| - (1 - 2/p) |φ_z|` per valid node.
pub fn kqr_defect(field: &ComplexField, p: f64) -> Result<NodalCheck> {
    check_p(p)?;
    let k = 1.0 - 2.0 / p;
    nodal_check(field, |a, b| b.norm() - k * a.norm())
}

/// `|Dφ|² / (p - 1) - J_φ` per valid node, with `J_φ = |φ_z|² - |φ_z̄|²` and the
/// operator norm `|Dφ| = |φ_z| + |φ_z̄|`. Non-positive exactly where
/// `|φ_z̄| <= (1 - 2/p) |φ_z|`.
pub fn jacobian_check(field: &ComplexField, p: f64) -> Result<NodalCheck> {
    check_p(p)?;
    nodal_check(field, |a, b| {
        let (na, nb) = (a.norm(), b.norm());
        (na + nb).powi(2) / (p - 1.0) - (na * na - nb * nb)
    })
}

/// Squared Frobenius norm of the real Jacobian, `2 (|φ_z|² + |φ_z̄|²)`.
pub fn frobenius_density(field: &ComplexField) -> Result<NodalCheck> {
    nodal_check(field, |a, b| 2.0 * (a.norm_sqr() + b.norm_sqr()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradientMappingDefect {
    /// `sup |Im φ_z̄|`
    pub imag_sup: f64,
    /// `sup |φ_z̄ - Δu/4|`, `Δu` from the composed central differences on `u`.
    pub laplacian_sup: f64,
    pub nodes: usize,
}

/// Gradient-mapping identities `Im φ_z̄ = 0` and `φ_z̄ = Δu / 4`.
///
/// `Δu = D_x D_x u + D_y D_y u` uses the same central difference twice, so the
/// Laplacian check covers only nodes whose two-step stencil is available.
pub fn gradient_mapping_defect(field: &ComplexField, u: &GridFunction) -> Result<GradientMappingDefect> {
    let (_, b) = field.derivatives()?;
    let grid = &field.grid;
    if !Arc::ptr_eq(grid, u.grid()) {
        return Err(Error::Config("field and scalar live on different grids".into()));
    }
    let h = grid.h();
    let mut imag_sup: f64 = 0.0;
    let mut laplacian_sup: f64 = 0.0;
    let mut nodes = 0;
    for k in 0..grid.num_nodes() {
        if !field.valid_mask[k] {
            continue;
        }
        imag_sup = imag_sup.max(b[k].im.abs());
        if let Some([e, w, n, s]) = axis_neighbors(grid, k, 2) {
            let uk = u.value(k);
            let lap = (u.value(e) - 2.0 * uk + u.value(w) + u.value(n) - 2.0 * uk + u.value(s))
                / (4.0 * h * h);
            laplacian_sup = laplacian_sup.max((b[k] - Complex64::new(0.25 * lap, 0.0)).norm());
            nodes += 1;
        }
    }
    Ok(GradientMappingDefect {
        imag_sup,
        laplacian_sup,
        nodes,
    })
}

/// Nodes where the recovered `|∇u|` is at least `threshold`.
pub fn nondegenerate_mask(u: &GridFunction, threshold: f64) -> Vec<bool> {
    let grad = recover_gradient(u);
    (0..u.grid().num_nodes())
        .map(|k| u.grid().is_active(k) && grad.norm(k) >= threshold)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorreyRow {
    pub r: f64,
    pub integral: f64,
    pub ratio: f64,
}

/// Ratios `∫_{B_r}|∇φ|² / ((p-1) (2r)^{2 α(p)} ∫_{B_{1/2}}|∇φ|²)` around `center`.
///
/// `|∇φ|²` is integrated triangle by triangle from the P1 interpolant of φ; a
/// triangle belongs to a ball when its centroid does.
pub fn morrey_growth(field: &ComplexField, p: f64, radii: &[f64], center: [f64; 2]) -> Result<Vec<MorreyRow>> {
    if !(p > 2.0) {
        return Err(domain("Morrey growth needs p > 2", p));
    }
    let alpha = alpha_bk(p)?;
    let grid = &field.grid;
    let h = grid.h();
    for &r in radii {
        if !(r > 2.0 * h && r <= 0.5 + GEOM_TOL) {
            return Err(Error::InsufficientResolution(format!(
                "Morrey radius {r} must lie in (2h, 1/2] with 2h = {}",
                2.0 * h
            )));
        }
    }
    let densities: Vec<(f64, f64, f64)> = (0..grid.triangles().len())
        .map(|t| {
            let tri = grid.triangles()[t];
            let bg = &grid.basis_grads()[t];
            let mut gre = [0.0; 2];
            let mut gim = [0.0; 2];
            for c in 0..3 {
                let v = field.phi[tri[c]];
                for d in 0..2 {
                    gre[d] += v.re * bg[c][d];
                    gim[d] += v.im * bg[c][d];
                }
            }
            let dens = gre[0] * gre[0] + gre[1] * gre[1] + gim[0] * gim[0] + gim[1] * gim[1];
            let [cx, cy] = grid.centroid(t);
            ((cx - center[0]).hypot(cy - center[1]), grid.areas()[t], dens)
        })
        .collect();
    let integral = |r: f64| -> Result<f64> {
        let mut any = false;
        let mut s = 0.0;
        for &(dist, area, dens) in &densities {
            if dist <= r + GEOM_TOL {
                any = true;
                s += area * dens;
            }
        }
        if any {
            Ok(s)
        } else {
            Err(Error::InsufficientResolution(format!("ball of radius {r} holds no triangle")))
        }
    };
    let reference = integral(0.5)?;
    if !reference.is_finite() {
        return Err(Error::NumericalBreakdown("non-finite Dirichlet integral of phi".into()));
    }
    radii
        .iter()
        .map(|&r| {
            let i_r = integral(r)?;
            let ratio = if reference > 0.0 {
                i_r / ((p - 1.0) * (2.0 * r).powf(2.0 * alpha) * reference)
            } else {
                0.0
            };
            Ok(MorreyRow { r, integral: i_r, ratio })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_gradient_of_coordinates() {
        let grid = build_grid(8, false).unwrap();
        let fx = complex_gradient(&GridFunction::from_fn(&grid, |x, _| x));
        let fy = complex_gradient(&GridFunction::from_fn(&grid, |_, y| y));
        for k in grid.active_nodes() {
            assert!((fx.phi()[k] - c(0.5, 0.0)).norm() < 1e-12);
            assert!((fy.phi()[k] - c(0.0, -0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn complex_gradient_of_harmonic_quadratic_is_z() {
        let grid = build_grid(16, false).unwrap();
        let f = complex_gradient(&GridFunction::from_fn(&grid, |x, y| x * x - y * y));
        for (i, j) in [(8, 8), (3, 5), (12, 4), (10, 14), (1, 1)] {
            let k = grid.index(i, j);
            let [x, y] = grid.node(k);
            assert!((f.phi()[k] - c(x, y)).norm() < 1e-12, "node ({i},{j})");
        }
    }

    #[test]
    fn wirtinger_of_z_and_zbar() {
        let grid = build_grid(8, false).unwrap();
        let f = wirtinger(&ComplexField::from_fn(&grid, |z| z));
        let g = wirtinger(&ComplexField::from_fn(&grid, |z| z.conj()));
        let mut seen = 0;
        for k in 0..grid.num_nodes() {
            if f.is_valid(k) {
                seen += 1;
                assert!((f.phi_z().unwrap()[k] - c(1.0, 0.0)).norm() < 1e-12);
                assert!(f.phi_zbar().unwrap()[k].norm() < 1e-12);
                assert!(g.phi_z().unwrap()[k].norm() < 1e-12);
                assert!((g.phi_zbar().unwrap()[k] - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
        assert_eq!(seen, 7 * 7);
    }

    #[test]
    fn wirtinger_consistency() {
        let grid = build_grid(16, true).unwrap();
        let f = wirtinger(&ComplexField::from_fn(&grid, |z| (z * z).exp() + z.conj().sin()));
        let (dx, dy) = f.partials().unwrap();
        let (a, b) = (f.phi_z().unwrap(), f.phi_zbar().unwrap());
        let i_unit = c(0.0, 1.0);
        for k in 0..grid.num_nodes() {
            if f.is_valid(k) {
                assert!((a[k] + b[k] - dx[k]).norm() <= 1e-12);
                assert!((a[k] - b[k] + i_unit * dy[k]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn checks_require_derivatives() {
        let grid = build_grid(8, false).unwrap();
        let f = ComplexField::from_fn(&grid, |z| z);
        assert!(kqr_defect(&f, 3.0).is_err());
    }

    #[test]
    fn affine_scalar_has_no_defects() {
        let grid = build_grid(16, false).unwrap();
        let u = GridFunction::from_fn(&grid, |x, y| 0.3 * x - 1.1 * y + 2.0);
        let f = wirtinger(&complex_gradient(&u));
        assert!(kqr_defect(&f, 3.0).unwrap().max() <= 1e-10);
        let j = jacobian_check(&f, 3.0).unwrap();
        assert!(j.max().abs() <= 1e-12);
        let gm = gradient_mapping_defect(&f, &u).unwrap();
        assert!(gm.imag_sup <= 1e-12 && gm.laplacian_sup <= 1e-12);
        let rows = morrey_growth(&f, 3.0, &[0.5, 0.3], [0.0, 0.0]).unwrap();
        assert!(rows.iter().all(|r| r.integral <= 1e-24));
    }

    #[test]
    fn harmonic_quadratic_at_p_two() {
        let grid = build_grid(16, false).unwrap();
        let u = GridFunction::from_fn(&grid, |x, y| x * x - y * y);
        let f = wirtinger(&complex_gradient(&u));
        assert!(kqr_defect(&f, 2.0).unwrap().max() <= 1e-8);
    }

    #[test]
    fn radial_quadratic_laplacian() {
        let grid = build_grid(16, false).unwrap();
        let u = GridFunction::from_fn(&grid, |x, y| x * x + y * y);
        let f = wirtinger(&complex_gradient(&u));
        let gm = gradient_mapping_defect(&f, &u).unwrap();
        assert!(gm.imag_sup <= 1e-12);
        assert!(gm.laplacian_sup <= 1e-12);
        for k in 0..grid.num_nodes() {
            if f.is_valid(k) {
                assert!((f.phi_zbar().unwrap()[k] - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_golden_for_identity_map() {
        let grid = build_grid(8, false).unwrap();
        let f = wirtinger(&ComplexField::from_fn(&grid, |z| z));
        for p in [2.5, 3.0, 4.0] {
            let j = jacobian_check(&f, p).unwrap();
            assert_abs_diff_eq!(j.max(), 1.0 / (p - 1.0) - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn morrey_rejects_small_radius() {
        let grid = build_grid(16, false).unwrap();
        let f = ComplexField::from_fn(&grid, |z| z);
        assert!(matches!(
            morrey_growth(&f, 3.0, &[0.2], [0.0, 0.0]),
            Err(Error::InsufficientResolution(_))
        ));
    }
}

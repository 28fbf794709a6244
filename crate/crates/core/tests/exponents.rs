use plap_core::exponents::{
    alpha_bk, alpha_crit, alpha_star, conjugate, exponent_chain, identity_defect, radial_constant, tau0, ExponentSet,
};
use proptest::prelude::*;

/// `Δ_p v(r)` for a radial profile in dimension `d`, from nested central
/// differences of the divergence form `r^{1-d} (r^{d-1} |v'|^{p-2} v')'`.
fn radial_plaplacian(v: impl Fn(f64) -> f64, r: f64, d: u32, p: f64, step: f64) -> f64 {
    let dv = |s: f64| (v(s + 0.5 * step) - v(s - 0.5 * step)) / step;
    let flux = |s: f64| {
        let g = dv(s);
        s.powi(d as i32 - 1) * g.abs().powf(p - 2.0) * g
    };
    (flux(r + 0.5 * step) - flux(r - 0.5 * step)) / (step * r.powi(d as i32 - 1))
}

#[test]
fn radial_constant_solves_the_radial_problem() {
    for d in [2u32, 3] {
        for p in [2.5, 3.0, 4.0] {
            let c = radial_constant(d, p).unwrap();
            let q = conjugate(p).unwrap();
            for r in [0.3, 0.6, 0.9] {
                let lap = radial_plaplacian(|s| c * (1.0 - s.powf(q)), r, d, p, 1e-4);
                assert!((-lap - 1.0).abs() <= 1e-6, "d={d} p={p} r={r}: {}", -lap - 1.0);
            }
        }
    }
}

#[test]
fn chain_margins_shrink_towards_two() {
    let ps: Vec<f64> = (1..=40).map(|i| 2.0 + 0.005 * i as f64).collect();
    let reports: Vec<_> = ps.iter().map(|&p| exponent_chain(p).unwrap()).collect();
    for w in reports.windows(2) {
        assert!(w[0].upper_margin < w[1].upper_margin);
        assert!(w[0].lower_margin < w[1].lower_margin);
    }
    assert!(reports[0].upper_margin < 0.02 && reports[0].lower_margin < 0.02);
}

#[test]
fn exponents_decrease_in_p() {
    let ps: Vec<f64> = (0..=480).map(|i| 2.0 + 0.1 * i as f64).collect();
    for w in ps.windows(2) {
        assert!(alpha_star(w[1]).unwrap() < alpha_star(w[0]).unwrap());
        assert!(alpha_bk(w[1]).unwrap() < alpha_bk(w[0]).unwrap());
    }
}

#[test]
fn tau0_near_the_degenerate_endpoint() {
    let t = tau0(2.0 + 1e-6).unwrap();
    assert!(t > 0.0 && t < 1e-5);
}

proptest! {
    #[test]
    fn conjugate_is_an_involution(p in 1.01f64..100.0) {
        let q = conjugate(p).unwrap();
        prop_assert!((conjugate(q).unwrap() - p).abs() <= 1e-12 * p.max(1.0));
        prop_assert!(identity_defect(p).unwrap() <= 1e-12);
    }

    #[test]
    fn chain_holds_on_the_whole_range(p in 2.001f64..50.0) {
        let rep = exponent_chain(p).unwrap();
        prop_assert!(rep.pass);
        prop_assert!(rep.upper_margin > 0.0 && rep.lower_margin > 0.0);
        let set = ExponentSet::new(p).unwrap();
        let t = set.tau0.unwrap();
        prop_assert!(t > 0.0 && t < (p - 2.0) / (p - 1.0));
        prop_assert!(alpha_crit(p).unwrap() + t <= set.alpha_bk);
    }
}

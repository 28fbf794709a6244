use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use plap_core::exponents::radial_constant;
use plap_core::grid::{build_grid, Grid, GridFunction};
use plap_core::solver::{energy, random_initial, residual, solve, solve_from, ProblemSpec, SolverConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cotangent-formula stiffness matrix and lumped masses over all nodes.
fn cotangent_system(grid: &Grid) -> (DMatrix<f64>, Vec<f64>) {
    let n = grid.num_nodes();
    let mut k = DMatrix::zeros(n, n);
    let mut mass = vec![0.0; n];
    for tri in grid.triangles() {
        let pts = tri.map(|i| grid.node(i));
        let cross = (pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1])
            - (pts[2][0] - pts[0][0]) * (pts[1][1] - pts[0][1]);
        let area = 0.5 * cross.abs();
        for c in 0..3 {
            // Angle at vertex c faces the edge (a, b).
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            let u = [pts[a][0] - pts[c][0], pts[a][1] - pts[c][1]];
            let v = [pts[b][0] - pts[c][0], pts[b][1] - pts[c][1]];
            let cot = (u[0] * v[0] + u[1] * v[1]) / (u[0] * v[1] - u[1] * v[0]).abs();
            let w = 0.5 * cot;
            let (ia, ib) = (tri[a], tri[b]);
            k[(ia, ib)] -= w;
            k[(ib, ia)] -= w;
            k[(ia, ia)] += w;
            k[(ib, ib)] += w;
            mass[tri[c]] += area / 3.0;
        }
    }
    (k, mass)
}

fn sin_sin(grid: &Arc<Grid>) -> GridFunction {
    GridFunction::from_fn(grid, |x, y| (PI * x).sin() * (PI * y).sin())
}

#[test]
fn linear_case_matches_dense_direct_solve() {
    let grid = build_grid(32, false).unwrap();
    let f = sin_sin(&grid);
    let spec = ProblemSpec::new(2.0, f.clone(), GridFunction::zeros(&grid)).unwrap();
    let res = solve(&spec, &SolverConfig::default()).unwrap();
    assert!(res.converged);

    let (k, mass) = cotangent_system(&grid);
    let dofs: Vec<usize> = (0..grid.num_nodes()).filter(|&i| grid.is_interior(i)).collect();
    let a = DMatrix::from_fn(dofs.len(), dofs.len(), |r, c| k[(dofs[r], dofs[c])]);
    let b = DVector::from_iterator(dofs.len(), dofs.iter().map(|&i| mass[i] * f.value(i)));
    let x = a.cholesky().expect("stiffness is SPD").solve(&b);
    let err = dofs
        .iter()
        .enumerate()
        .map(|(r, &i)| (x[r] - res.u.value(i)).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-8, "L-inf distance to direct solve {err:e}");
}

#[test]
fn linear_residual_is_stiffness_product() {
    let grid = build_grid(16, true).unwrap();
    let f = sin_sin(&grid);
    let spec = ProblemSpec::new(2.0, f.clone(), GridFunction::zeros(&grid)).unwrap();
    let u = GridFunction::from_fn(&grid, |x, y| (1.0 - x * x - y * y) * (x + 2.0 * y).cos());
    let r = residual(&u, &spec, 0.0);
    let (k, mass) = cotangent_system(&grid);
    let uv = DVector::from_column_slice(u.values());
    let ku = &k * uv;
    for i in 0..grid.num_nodes() {
        let expected = if grid.is_interior(i) { ku[i] - mass[i] * f.value(i) } else { 0.0 };
        assert!((r.value(i) - expected).abs() <= 1e-12, "node {i}: {} vs {expected}", r.value(i));
    }
}

#[test]
fn residual_matches_energy_finite_differences() {
    let grid = build_grid(16, false).unwrap();
    let spec = ProblemSpec::new(
        3.0,
        GridFunction::from_fn(&grid, |x, _| 1.0 + x),
        GridFunction::from_fn(&grid, |x, y| 0.3 * x - 0.2 * y),
    )
    .unwrap();
    let u = random_initial(&spec, 7, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for eps in [0.1, 1e-3] {
        let r = residual(&u, &spec, eps);
        for _ in 0..10 {
            let dir: Vec<f64> = (0..grid.num_nodes())
                .map(|k| if grid.is_interior(k) { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect();
            let shifted = |t: f64| {
                let v: Vec<f64> = u.values().iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                GridFunction::from_values(&grid, v).unwrap()
            };
            let step = 1e-5;
            let fd = (energy(&shifted(step), &spec, eps) - energy(&shifted(-step), &spec, eps)) / (2.0 * step);
            let exact: f64 = r.values().iter().zip(&dir).map(|(a, d)| a * d).sum();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "eps {eps}: fd {fd} vs {exact}");
        }
    }
}

#[test]
fn minimizer_does_not_depend_on_initial_guess() {
    let grid = build_grid(32, true).unwrap();
    let spec = ProblemSpec::new(
        3.0,
        GridFunction::from_fn(&grid, |x, y| 1.0 + 0.5 * x * y),
        GridFunction::from_fn(&grid, |x, _| 0.2 * x),
    )
    .unwrap();
    let cfg = SolverConfig::default();
    let a = solve(&spec, &cfg).unwrap();
    let b = solve_from(&spec, &cfg, &random_initial(&spec, 42, 1.0)).unwrap();
    assert!(a.converged && b.converged);
    let d = a.u.sup_distance(&b.u);
    assert!(d <= 1e-7, "solutions differ by {d:e}");
}

#[test]
fn radial_benchmark_is_close_at_moderate_resolution() {
    let grid = build_grid(32, true).unwrap();
    let spec = ProblemSpec::new(3.0, GridFunction::from_fn(&grid, |_, _| 1.0), GridFunction::zeros(&grid)).unwrap();
    let res = solve(&spec, &SolverConfig::default()).unwrap();
    assert!(res.converged);
    let c = radial_constant(2, 3.0).unwrap();
    let exact = GridFunction::from_fn(&grid, |x, y| c * (1.0 - x.hypot(y).powf(1.5)));
    assert!(res.u.sup_distance(&exact) <= 2e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn energy_history_is_nonincreasing(seed in 0u64..1000, p in 2.2f64..4.5) {
        let grid = build_grid(8, true).unwrap();
        let spec = ProblemSpec::new(p, GridFunction::from_fn(&grid, |_, _| 1.0), GridFunction::zeros(&grid)).unwrap();
        let res = solve_from(&spec, &SolverConfig::default(), &random_initial(&spec, seed, 1.0)).unwrap();
        for (i, s) in res.stages.iter().enumerate() {
            let h = res.stage_history(i);
            for w in h.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "stage eps {}: {} -> {}", s.eps, w[0], w[1]);
            }
        }
    }

    #[test]
    fn boundary_values_survive_the_solve(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let grid = build_grid(8, false).unwrap();
        let g = GridFunction::from_fn(&grid, |x, y| a * x * x + b * y);
        let spec = ProblemSpec::new(3.0, GridFunction::zeros(&grid), g.clone()).unwrap();
        let res = solve(&spec, &SolverConfig::default()).unwrap();
        for k in 0..grid.num_nodes() {
            if grid.is_boundary(k) {
                prop_assert_eq!(res.u.value(k), g.value(k));
            }
        }
    }
}

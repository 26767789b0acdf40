use pdpclust::sparse::{solve_weighted_l1, SolverConfig, SolverMethod};
use pdpclust_testkit::lsq::{line_fit, second_difference};
use pdpclust_testkit::qp::weighted_curvature_ls;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random piecewise-linear profile with Gaussian-ish jitter, random weights
/// and a budget that keeps the constraint active.
fn instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, f64) {
    let n = rng.random_range(3..=20);
    let mut p = Vec::with_capacity(n);
    let mut level = rng.random_range(-10.0..10.0);
    let mut slope = rng.random_range(-2.0..2.0);
    for _ in 0..n {
        if rng.random_bool(0.2) {
            slope = rng.random_range(-2.0..2.0);
        }
        level += slope;
        p.push(level + rng.random_range(-0.5..0.5));
    }
    let w: Vec<f64> = (0..n - 2).map(|_| rng.random_range(0.2..5.0)).collect();
    let full: f64 = second_difference(&p).iter().zip(&w).map(|(c, wi)| c.abs() * wi).sum();
    let l_max = full * rng.random_range(0.05..0.9);
    (p, w, l_max)
}

fn admm(tol: f64) -> SolverConfig<f64> {
    SolverConfig {
        method: SolverMethod::Admm,
        primal_tol: tol,
        dual_tol: tol,
        max_inner_iters: 500_000,
        ..SolverConfig::default()
    }
}

#[test]
fn matches_dense_qp_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..50 {
        let (p, w, l_max) = instance(&mut rng);
        let oracle = weighted_curvature_ls(&p, &w, l_max);
        for cfg in [SolverConfig::default(), admm(1e-4), admm(1e-9)] {
            let got = solve_weighted_l1(&p, &w, l_max, &cfg).unwrap();
            let rel = (got.objective - oracle.objective).abs() / oracle.objective.max(1e-12);
            assert!(
                rel <= 1e-4,
                "case {case} (n = {}, {:?} tol {}): {} vs oracle {} (rel {rel:e})",
                p.len(),
                cfg.method,
                cfg.primal_tol,
                got.objective,
                oracle.objective
            );
        }
    }
}

#[test]
fn sixteen_point_piecewise_linear_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let p: Vec<f64> = (0..16)
        .map(|i| {
            let i = i as f64;
            let clean = if i < 6.0 { -i } else if i < 11.0 { -6.0 + 2.0 * (i - 6.0) } else { 4.0 - 0.5 * (i - 11.0) };
            clean + rng.random_range(-0.3..0.3)
        })
        .collect();
    let w = vec![1.0; 14];
    let oracle = weighted_curvature_ls(&p, &w, 3.0);
    for cfg in [SolverConfig::default(), admm(1e-6)] {
        let got = solve_weighted_l1(&p, &w, 3.0, &cfg).unwrap();
        assert!((got.objective - oracle.objective).abs() <= 1e-4 * oracle.objective);
    }
}

#[test]
fn zero_budget_is_least_squares_line() {
    let p = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
    let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
    let (a, b) = line_fit(&xs, &p);
    for cfg in [SolverConfig::default(), admm(1e-6)] {
        let got = solve_weighted_l1(&p, &[1.0; 6], 0.0, &cfg).unwrap();
        for (i, v) in got.p_hat.iter().enumerate() {
            assert!((v - (a + b * i as f64)).abs() < 1e-9);
        }
    }
}

#[test]
fn returned_curvature_is_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (p, w, l_max) = instance(&mut rng);
        for cfg in [SolverConfig::default(), admm(1e-4)] {
            let got = solve_weighted_l1(&p, &w, l_max, &cfg).unwrap();
            let used: f64 = second_difference(&got.p_hat).iter().zip(&w).map(|(c, wi)| c.abs() * wi).sum();
            assert!(used <= l_max * (1.0 + 1e-9) + 1e-9, "{used} > {l_max}");
        }
    }
}

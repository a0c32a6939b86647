use compactqn::linalg::dot;
use compactqn::problems::{make_synthetic_multiclass, Quadratic, Rosenbrock};
use compactqn::solvers::{minimize_linesearch, minimize_stochastic, minimize_trustregion, wolfe_linesearch};
use compactqn::{PairPolicy, Problem, SolverConfig, Status, StochasticMode};

#[test]
fn greenstadt_policy_on_rosenbrock_64() {
    let p = Rosenbrock::new(64).unwrap();
    let cfg = SolverConfig { policy: PairPolicy::EqualsY, ..SolverConfig::default() };
    let r = minimize_linesearch(&p, &p.start(), &cfg).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(r.gnorm_final <= 1e-5);
}

#[test]
fn linesearch_eval_budget_on_rosenbrock() {
    for e in 3..=8 {
        let d = 1 << e;
        let p = Rosenbrock::new(d).unwrap();
        let r = minimize_linesearch(&p, &p.start(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged, "d={d}");
        assert!(r.f_evals <= 10 * d, "d={d}: {} evals", r.f_evals);
    }
}

#[test]
fn every_line_search_step_is_a_wolfe_point() {
    let p = Rosenbrock::new(6).unwrap();
    let cfg = SolverConfig::default();
    let mut w = p.start();
    for _ in 0..10 {
        let (f0, g0) = p.eval(&w).unwrap();
        let dir: Vec<f64> = g0.iter().map(|v| -v / (1.0 + dot(&g0, &g0).sqrt())).collect();
        let ls = wolfe_linesearch(&p, &w, &dir, f0, &g0, &cfg).unwrap();
        let next: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + ls.alpha * b).collect();
        let (f1, g1) = p.eval(&next).unwrap();
        let slope0 = dot(&dir, &g0);
        assert!(f1 <= f0 + cfg.wolfe_c1 * ls.alpha * slope0);
        assert!(dot(&dir, &g1).abs() <= cfg.wolfe_c2 * slope0.abs());
        assert!(ls.evals <= 30);
        w = next;
    }
}

#[test]
fn trust_region_steps_respect_radius() {
    let q = Quadratic::random_spd(20, 8);
    let cfg = SolverConfig { tr_delta0: 0.05, ..SolverConfig::default() };
    let r = minimize_trustregion(&q, &[0.0; 20], &cfg).unwrap();
    assert_eq!(r.status, Status::Converged);
    let mut last = f64::INFINITY;
    for row in r.trace.iter().filter(|t| t.accepted) {
        assert!(row.f < last);
        last = row.f;
        assert!(row.step >= 0.0);
    }
}

#[test]
fn trust_region_rosenbrock_small() {
    let p = Rosenbrock::new(16).unwrap();
    let r = minimize_trustregion(&p, &p.start(), &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(r.w.iter().all(|v| (v - 1.0).abs() < 1e-3));
}

#[test]
fn stochastic_runs_are_reproducible() {
    let prob = make_synthetic_multiclass(900, 8, 3, 4, 4.0).unwrap();
    let cfg = SolverConfig { memory: 1, batch_size: 64, epochs: 3, seed: 11, ..SolverConfig::default() };
    for mode in [StochasticMode::Sgd, StochasticMode::CompactS, StochasticMode::CompactY] {
        let a = minimize_stochastic(&prob, &[0.0; 24], &cfg, mode).unwrap();
        let b = minimize_stochastic(&prob, &[0.0; 24], &cfg, mode).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.epochs.len(), 4);
        assert!(a.epochs[3].train_loss < a.epochs[0].train_loss, "{}", mode.name());
    }
}

#[test]
fn well_separated_classes_are_learned() {
    let prob = make_synthetic_multiclass(1200, 4, 3, 2, 12.0).unwrap();
    let cfg = SolverConfig { memory: 1, batch_size: 64, epochs: 5, seed: 2, ..SolverConfig::default() };
    let r = minimize_stochastic(&prob, &[0.0; 12], &cfg, StochasticMode::Sgd).unwrap();
    assert!(r.epochs.last().unwrap().holdout_acc >= 0.95);
}

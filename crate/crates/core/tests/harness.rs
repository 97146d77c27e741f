use localsgd::algorithms::{run, Pattern, RunConfig};
use localsgd::config::{ProblemSpec, SweepSpec};
use localsgd::harness::{
    exact_expectation, grid_search_curve, hinge_counterexample, invariance_report, monte_carlo, run_sweep,
    sweep_rows, verify_quadratic_invariance, with_workers, StepsizeGrid,
};
use localsgd::problems::{HardInstance, NoiseKind, Objective, QuadraticProblem, ScalarHinge};
use localsgd::record::write_sweep_csv;
use proptest::prelude::*;

fn quad(sigma: f64) -> QuadraticProblem {
    QuadraticProblem::scalar(1.0, 0.0, NoiseKind::Rademacher, sigma).unwrap()
}

#[test]
fn monte_carlo_agrees_with_enumeration() {
    let q = quad(1.0);
    let h = ScalarHinge::new(1.0, 0.0, 1.0).unwrap();
    let hard = HardInstance::new(1.0, 0.0, 1.0, 1.0, 0.05).unwrap();
    let matrix: Vec<(&dyn Objective, RunConfig)> = vec![
        (&q, RunConfig::new(Pattern::Local, 2, 2, 2, 0.3, 0).with_x0(vec![1.0])),
        (&q, RunConfig::new(Pattern::Minibatch, 3, 2, 2, 0.5, 0).with_x0(vec![1.0])),
        (&q, RunConfig::new(Pattern::ThumbTwiddling, 2, 3, 3, 0.4, 0).with_x0(vec![-0.5])),
        (&h, RunConfig::new(Pattern::Local, 2, 2, 2, 0.1, 0)),
        (&h, RunConfig::new(Pattern::Minibatch, 2, 2, 2, 0.1, 0)),
        (&h, RunConfig::serial(6, 0.2, 0).with_x0(vec![0.3])),
        (&hard, RunConfig::new(Pattern::Local, 2, 3, 2, 0.7, 0)),
    ];
    for (i, (p, cfg)) in matrix.into_iter().enumerate() {
        let exact = exact_expectation(p, &cfg).unwrap();
        let mc = monte_carlo(p, &cfg, 20_000, 100 + i as u64).unwrap();
        let z = (mc.mean - exact.subopt) / mc.stderr;
        assert!(z.abs() <= 3.0, "case {i}: mc {} +- {} vs exact {}", mc.mean, mc.stderr, exact.subopt);
        for r in 0..cfg.r {
            let zr = (mc.round_mean[r] - exact.round_subopt[r]) / mc.round_stderr[r].max(1e-300);
            assert!(zr.abs() <= 3.0 || mc.round_stderr[r] == 0.0, "case {i} round {r}");
        }
    }
}

#[test]
fn noiseless_monte_carlo_is_the_deterministic_run() {
    let p = quad(0.0);
    let cfg = RunConfig::new(Pattern::ThumbTwiddling, 4, 3, 5, 0.25, 0).with_x0(vec![2.0]);
    let est = monte_carlo(&p, &cfg, 16, 3).unwrap();
    assert_eq!(est.mean, run(&p, &cfg).unwrap().suboptimality);
    assert_eq!(est.stderr, 0.0);
}

fn small_sweep() -> SweepSpec {
    SweepSpec {
        problem: ProblemSpec::Hard { h: 1.0, lambda: 0.0, b: 1.0, sigma: 1.0, form: Default::default(), mu: None },
        algorithms: vec!["local".into(), "minibatch".into(), "thumb_twiddling".into(), "local_acsa".into()],
        m: vec![2, 8],
        k: vec![2, 3],
        r: vec![4],
        eta_grid: StepsizeGrid::log_spaced(0.0625, 2.0, 2).unwrap(),
        reps: 40,
        seed: 9,
        rounds: None,
        averaging: Default::default(),
        x0: None,
    }
}

fn sweep_csv(spec: &SweepSpec, workers: usize) -> Vec<u8> {
    let curves = with_workers(workers, || run_sweep(spec).unwrap()).unwrap();
    let mut out = Vec::new();
    write_sweep_csv(&mut out, spec, &sweep_rows(spec, &curves)).unwrap();
    out
}

#[test]
fn sweep_csv_is_bit_identical_across_worker_counts() {
    let spec = small_sweep();
    let a = sweep_csv(&spec, 1);
    assert_eq!(a, sweep_csv(&spec, 3));
    assert_eq!(a, sweep_csv(&spec, 0));
}

#[test]
fn quadratic_invariance_and_variance_reduction() {
    for (t, m) in [(4, 2), (6, 3), (4, 1), (8, 2)] {
        let rep = verify_quadratic_invariance(t, m, 1.0, 0.3).unwrap();
        assert!(rep.max_discrepancy <= 1e-12, "T={t} M={m}: {}", rep.max_discrepancy);
        assert!(rep.variance_gap <= 1e-12, "T={t} M={m}: {}", rep.variance_gap);
        if m == 1 {
            assert_eq!(rep.max_discrepancy, 0.0);
        }
    }
}

#[test]
fn hinge_breaks_invariance_and_biases_local_sgd() {
    let h = ScalarHinge::new(1.0, 0.0, 1.0).unwrap();
    let rep = invariance_report(&h, 4, 2, 0.1, vec![0.0]).unwrap();
    assert!(rep.max_discrepancy > 1e-6);
    let c = hinge_counterexample(2, 2, 2, 0.1, 1.0).unwrap();
    assert!(c.local_mean < -1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn invariance_holds_for_any_quadratic_stepsize(eta in 0.01f64..1.5, sigma in 0.1f64..3.0, m in 1usize..4) {
        let rep = verify_quadratic_invariance(4, m, sigma, eta).unwrap();
        let scale = rep.factorizations[0].mean.abs().max(1.0);
        prop_assert!(rep.max_discrepancy <= 1e-12 * scale);
        prop_assert!(rep.variance_gap <= 1e-12 * rep.serial_variance.max(1.0));
    }

    #[test]
    fn tuned_minibatch_curve_is_nearly_monotone(m in 1usize..6, k in 1usize..5, seed in any::<u64>()) {
        let p = quad(1.0);
        let base = RunConfig::new(Pattern::Minibatch, m, k, 12, 0.1, 0).with_x0(vec![1.0]);
        let grid = StepsizeGrid::log_spaced(0.01, 1.0, 2).unwrap();
        let curve = grid_search_curve(&p, &base, &grid, 64, seed).unwrap();
        for w in curve.points.windows(2) {
            prop_assert!(w[1].mean <= w[0].mean + 3.0 * w[0].stderr.max(w[1].stderr));
        }
    }

    #[test]
    fn grid_curve_is_the_pointwise_minimum(seed in any::<u64>()) {
        let p = ScalarHinge::new(1.0, 0.0, 1.0).unwrap();
        let base = RunConfig::new(Pattern::Local, 3, 2, 5, 0.1, 0).with_x0(vec![0.5]);
        let grid = StepsizeGrid::points(vec![0.05, 0.2, 0.8]).unwrap();
        let curve = grid_search_curve(&p, &base, &grid, 16, seed).unwrap();
        for pt in &curve.points {
            let best = curve.per_eta.iter().map(|e| e.round_value(pt.round - 1)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(pt.mean, best);
        }
    }
}

//! Acceptance report: one PASS/FAIL line per headline criterion.
//!
//! Runs as a plain binary (`harness = false`). The report always exits 0 so
//! that a known-unattainable criterion does not mask the others; set
//! `ACCEPTANCE_STRICT=1` to exit 1 when any line fails.

mod common;

use std::sync::Arc;
use std::time::Instant;

use localsgd::algorithms::{Pattern, RunConfig};
use localsgd::harness::{
    deterministic_coordinates, drift_grid, drift_sweep, grid_search_curve, hinge_counterexample,
    verify_lower_bound, verify_quadratic_invariance, LowerBoundReport, LowerBoundSpec, StepsizeGrid,
};
use localsgd::problems::{generate_figure1_dataset, logistic_objective, HardInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT_TOL: f64 = 1e-12;
const COUNTEREXAMPLE_MARGIN: f64 = -1e-6;
const SEPARATION_SE: f64 = 3.0;
const FIGURE_SEEDS: u64 = 5;
const FIGURE_AGREEMENT: f64 = 0.8;

struct Report {
    passed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, ok: bool, name: &str, detail: String, started: Instant) {
        self.total += 1;
        self.passed += ok as usize;
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag}  {name}: {detail} [{:.2} s]", started.elapsed().as_secs_f64());
    }
}

fn quadratic_invariance(rep: &mut Report) {
    let t = Instant::now();
    let r = verify_quadratic_invariance(4, 2, 1.0, 0.3).unwrap();
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        r.max_discrepancy <= EXACT_TOL && r.weighted_discrepancy <= EXACT_TOL && secs < 1.0,
        "quadratic invariance",
        format!("max discrepancy {:.3e}, weighted {:.3e} over (K,R) in (1,4),(2,2),(4,1)", r.max_discrepancy, r.weighted_discrepancy),
        t,
    );
    let t = Instant::now();
    let worst = r.factorizations.iter().map(|f| (f.variance - r.serial_variance / 2.0).abs()).fold(0.0, f64::max);
    rep.line(
        worst <= EXACT_TOL,
        "variance reduction",
        format!("Var_M=2 {:.17} vs Var_1/2 {:.17}, gap {:.3e}", r.factorizations[0].variance, r.serial_variance / 2.0, worst),
        t,
    );
}

fn counterexample(rep: &mut Report) {
    let t = Instant::now();
    let c = hinge_counterexample(2, 2, 2, 0.1, 1.0).unwrap();
    rep.line(
        c.local_mean < COUNTEREXAMPLE_MARGIN && c.minibatch_mean == 0.0,
        "non-quadratic counterexample",
        format!(
            "local E x_bar = {:.6e} (< {COUNTEREXAMPLE_MARGIN:e}: {}), minibatch E x_R = {:.6e} (== 0: {}), minibatch round means {:?}",
            c.local_mean,
            c.local_mean < COUNTEREXAMPLE_MARGIN,
            c.minibatch_mean,
            c.minibatch_mean == 0.0,
            c.minibatch_round_means
        ),
        t,
    );
}

fn drift(rep: &mut Report) {
    let t = Instant::now();
    let grid = drift_grid();
    let r = drift_sweep(&grid).unwrap();
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        r.checked >= 200 && r.violations.is_empty() && secs < 10.0,
        "averaged-iterate drift sweep",
        format!("{} tuples, {} violations, worst margin {:.3e}", r.checked, r.violations.len(), r.worst_margin),
        t,
    );
}

fn coordinates(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let h = 1.0;
        let mu = rng.random_range(1e-3..h / 16.0);
        let eta = rng.random_range(0.01..2.0) / h;
        let k = rng.random_range(2..=32);
        let r = rng.random_range(1..=32);
        let m = rng.random_range(1..=8);
        let inst = HardInstance::new(h, 0.0, 1.0, 1.0, mu).unwrap();
        worst = worst.max(deterministic_coordinates(&inst, m, k, r, eta, i).unwrap().max_error());
    }
    rep.line(worst <= EXACT_TOL, "deterministic coordinates", format!("worst error {worst:.3e} over 50 tuples"), t);
}

fn lower_bound(k: usize, r: usize, grid: StepsizeGrid) -> LowerBoundReport {
    verify_lower_bound(&LowerBoundSpec { h: 1.0, lambda: 0.0, b: 1.0, sigma: 1.0, m: 256, k, r, grid, reps: 10_000, seed: 1 })
        .unwrap()
}

fn interior(rep: &LowerBoundReport, eta: Option<f64>) -> bool {
    let vals = rep.spec.grid.values();
    eta.is_some_and(|e| e > vals[0] && e < vals[vals.len() - 1])
}

fn regime_reversal(rep: &mut Report) {
    let t = Instant::now();
    let small_k = lower_bound(2, 64, StepsizeGrid::log_spaced(2f64.powi(-10), 2.0, 2).unwrap());
    let large_k = lower_bound(512, 4, StepsizeGrid::log_spaced(2f64.powi(-10), 2.0, 1).unwrap());
    let ok = small_k.separation_se >= SEPARATION_SE
        && -large_k.separation_se >= SEPARATION_SE
        && [&small_k, &large_k].iter().all(|r| interior(r, r.local_best.eta) && interior(r, r.minibatch_best.eta));
    let show = |r: &LowerBoundReport| {
        format!(
            "K={} R={}: local {:.4e}+-{:.1e} (eta {:?}) minibatch {:.4e}+-{:.1e} (eta {:?}) sep {:+.1} SE, c_fit {:.4}",
            r.spec.k,
            r.spec.r,
            r.local_best.mean,
            r.local_best.stderr,
            r.local_best.eta,
            r.minibatch_best.mean,
            r.minibatch_best.stderr,
            r.minibatch_best.eta,
            r.separation_se,
            r.c_fit
        )
    };
    rep.line(ok, "regime reversal", format!("{}; {}", show(&small_k), show(&large_k)), t);
}

/// Final-round tuned `(local, minibatch)` suboptimality for one seed.
fn figure_seed(seed: u64, k: usize, grid: &StepsizeGrid, problem: &dyn localsgd::problems::Objective) -> (f64, f64) {
    const M: usize = 10;
    const R: usize = 100;
    const REPS: usize = 4;
    let l = grid_search_curve(problem, &RunConfig::new(Pattern::Local, M, k, R, 1.0, 0), grid, REPS, seed).unwrap();
    let mb = grid_search_curve(problem, &RunConfig::new(Pattern::Minibatch, M, k, R, 1.0, 0), grid, REPS, seed).unwrap();
    (l.final_point().mean, mb.final_point().mean)
}

fn figure1(rep: &mut Report) {
    let t = Instant::now();
    let grid = StepsizeGrid::log_spaced(2f64.powi(-8), 16.0, 2).unwrap();
    let mut small_worse = 0;
    let mut large_better = 0;
    let mut detail = Vec::new();
    for seed in 0..FIGURE_SEEDS {
        let data = Arc::new(generate_figure1_dataset(5000, 25, seed).unwrap());
        let problem = logistic_objective(data).unwrap();
        let (l5, m5) = figure_seed(seed, 5, &grid, &problem);
        let (l200, m200) = figure_seed(seed, 200, &grid, &problem);
        small_worse += (l5 > m5) as usize;
        large_better += (l200 < m200) as usize;
        detail.push(format!("seed {seed}: K=5 {l5:.3e}/{m5:.3e} K=200 {l200:.3e}/{m200:.3e}"));
    }
    let need = (FIGURE_AGREEMENT * FIGURE_SEEDS as f64).ceil() as usize;
    rep.line(
        small_worse >= need && large_better >= need,
        "logistic K orderings",
        format!(
            "local above minibatch at K=5 on {small_worse}/{FIGURE_SEEDS}, below at K=200 on {large_better}/{FIGURE_SEEDS} (need {need}); local/minibatch: {}",
            detail.join("; ")
        ),
        t,
    );
}

fn rates(rep: &mut Report) {
    let t = Instant::now();
    let (err, name) = common::rates::worst_rate_error();
    let (checked, bad) = common::rates::dominance_violations();
    rep.line(
        err <= common::rates::RATE_TOL && bad.is_empty(),
        "rate expressions",
        format!(
            "{} frozen values, worst relative error {err:.3e} ({name}); dominance {} checks, {} violations",
            common::rates::RATE_CASES.len(),
            checked,
            bad.len()
        ),
        t,
    );
}

fn couplings(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut cases = 0;
    for acsa in [false, true] {
        for _ in 0..20 {
            let (m, k, r) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..8));
            let eta = rng.random_range(0.01..0.4);
            cases += 1;
            if let Err(e) = common::couplings::check_all(m, k, r, eta, rng.random(), acsa) {
                failures.push(e);
            }
        }
    }
    rep.line(
        failures.is_empty(),
        "coupling identities",
        format!("{cases} configurations x 5 families, SGD and AC-SA, {} failures {:?}", failures.len(), failures),
        t,
    );
}

fn main() {
    let mut rep = Report { passed: 0, total: 0 };
    quadratic_invariance(&mut rep);
    counterexample(&mut rep);
    drift(&mut rep);
    coordinates(&mut rep);
    rates(&mut rep);
    couplings(&mut rep);
    regime_reversal(&mut rep);
    figure1(&mut rep);
    println!("acceptance: {}/{} passed", rep.passed, rep.total);
    if rep.passed < rep.total && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}

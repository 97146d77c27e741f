use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hard_fast::HardPlan;
use crate::algorithms::{run, RunConfig};
use crate::error::{invalid, Result};
use crate::noise::child_seed;
use crate::problems::Objective;

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Replication {
    pub(crate) round_subopt: Vec<f64>,
    pub(crate) subopt: f64,
}

/// Monte Carlo estimate of `E F(output) - F*` and of the per-round curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// Mean over the replications that did not diverge.
    pub mean: f64,
    /// Sample standard deviation over `sqrt(reps)`; 0 when undefined.
    pub stderr: f64,
    pub reps: usize,
    pub diverged: usize,
    /// Set when the standard error could not be estimated (one finite value).
    pub stderr_undefined: bool,
    /// Every replication diverged; `mean` is `+inf`.
    pub all_diverged: bool,
    pub round_mean: Vec<f64>,
    pub round_stderr: Vec<f64>,
    /// Replications whose round-`r` iterate was non-finite.
    pub round_diverged: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    pub config: RunConfig,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloOptions {
    /// Keep the per-replication output suboptimalities.
    pub keep_values: bool,
    /// Use the specialised simulator when the problem is the lower-bound
    /// instance. Results agree with the generic engine to rounding.
    pub fast_path: bool,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self { keep_values: false, fast_path: true }
    }
}

/// `(mean, stderr, n_finite)` of the finite entries. Deviations are taken
/// from the first finite value so identical inputs give an exact mean and a
/// zero standard error.
pub(crate) fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let finite = values.filter(|v| v.is_finite());
    let n = finite.clone().count();
    let Some(shift) = finite.clone().next() else {
        return (f64::INFINITY, 0.0, 0);
    };
    let mean_dev = finite.clone().map(|v| v - shift).sum::<f64>() / n as f64;
    let mean = shift + mean_dev;
    if n == 1 {
        return (mean, 0.0, 1);
    }
    let ss: f64 = finite.map(|v| (v - shift - mean_dev).powi(2)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, sd / (n as f64).sqrt(), n)
}

pub(crate) fn replicate(
    problem: &dyn Objective,
    cfg: &RunConfig,
    reps: usize,
    master_seed: u64,
    fast_path: bool,
) -> Result<Vec<Replication>> {
    if reps == 0 {
        return Err(invalid("need at least one replication"));
    }
    cfg.validate()?;
    let seeds: Vec<u64> = (0..reps as u64).map(|i| child_seed(master_seed, i)).collect();
    if fast_path {
        if let Some(inst) = problem.as_hard_instance() {
            if HardPlan::eligible(cfg) {
                let plan = HardPlan::new(inst, cfg)?;
                return Ok(seeds.par_iter().map(|&s| plan.replicate(s)).collect());
            }
        }
    }
    seeds
        .par_iter()
        .map(|&s| {
            let mut c = cfg.clone();
            c.seed = s;
            run(problem, &c).map(|tr| Replication { round_subopt: tr.round_subopt, subopt: tr.suboptimality })
        })
        .collect()
}

pub(crate) fn summarize(
    reps: Vec<Replication>,
    cfg: &RunConfig,
    master_seed: u64,
    keep_values: bool,
) -> EstimateResult {
    let n = reps.len();
    let (mean, stderr, finite) = mean_stderr(reps.iter().map(|r| r.subopt));
    let rounds = cfg.r;
    let mut round_mean = Vec::with_capacity(rounds);
    let mut round_stderr = Vec::with_capacity(rounds);
    let mut round_diverged = Vec::with_capacity(rounds);
    for ri in 0..rounds {
        let (m, s, f) = mean_stderr(reps.iter().map(|r| r.round_subopt[ri]));
        round_mean.push(m);
        round_stderr.push(s);
        round_diverged.push(n - f);
    }
    EstimateResult {
        mean,
        stderr,
        reps: n,
        diverged: n - finite,
        stderr_undefined: finite < 2,
        all_diverged: finite == 0,
        round_mean,
        round_stderr,
        round_diverged,
        values: keep_values.then(|| reps.iter().map(|r| r.subopt).collect()),
        config: cfg.clone(),
        master_seed,
    }
}

/// Averages `reps` independent runs of `cfg`; replication `i` uses seed
/// `child_seed(master_seed, i)`. Runs on the current rayon pool and reduces
/// in replication order, so the result does not depend on the pool size.
pub fn monte_carlo(problem: &dyn Objective, cfg: &RunConfig, reps: usize, master_seed: u64) -> Result<EstimateResult> {
    monte_carlo_with(problem, cfg, reps, master_seed, MonteCarloOptions::default())
}

pub fn monte_carlo_with(
    problem: &dyn Objective,
    cfg: &RunConfig,
    reps: usize,
    master_seed: u64,
    opts: MonteCarloOptions,
) -> Result<EstimateResult> {
    let runs = replicate(problem, cfg, reps, master_seed, opts.fast_path)?;
    Ok(summarize(runs, cfg, master_seed, opts.keep_values))
}

/// Runs `f` on a dedicated pool of `workers` threads (0 means the default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Pattern;
    use crate::problems::{NoiseKind, QuadraticProblem};

    fn quad(sigma: f64) -> QuadraticProblem {
        QuadraticProblem::scalar(1.0, 0.0, NoiseKind::Rademacher, sigma).unwrap()
    }

    #[test]
    fn noiseless_problem_has_zero_stderr() {
        let p = quad(0.0);
        let cfg = RunConfig::new(Pattern::Local, 2, 3, 2, 0.2, 0).with_x0(vec![1.0]);
        let est = monte_carlo(&p, &cfg, 50, 9).unwrap();
        let single = run(&p, &cfg).unwrap();
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.mean, single.suboptimality);
    }

    #[test]
    fn single_replication_flags_stderr() {
        let p = quad(1.0);
        let cfg = RunConfig::new(Pattern::Local, 2, 2, 2, 0.3, 0).with_x0(vec![1.0]);
        let est = monte_carlo(&p, &cfg, 1, 5).unwrap();
        let mut c = cfg.clone();
        c.seed = child_seed(5, 0);
        assert_eq!(est.mean, run(&p, &c).unwrap().suboptimality);
        assert_eq!(est.stderr, 0.0);
        assert!(est.stderr_undefined);
        assert!(monte_carlo(&p, &cfg, 0, 5).is_err());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = quad(1.0);
        let cfg = RunConfig::new(Pattern::Minibatch, 3, 2, 4, 0.3, 0).with_x0(vec![1.0]);
        let a = with_workers(1, || monte_carlo(&p, &cfg, 200, 77).unwrap()).unwrap();
        let b = with_workers(4, || monte_carlo(&p, &cfg, 200, 77).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_diverged_is_flagged() {
        let p = quad(1.0);
        let cfg = RunConfig::new(Pattern::Local, 1, 1, 1200, 3.0, 0).with_x0(vec![1.0]);
        let est = monte_carlo(&p, &cfg, 4, 1).unwrap();
        assert!(est.all_diverged);
        assert_eq!(est.mean, f64::INFINITY);
        assert_eq!(est.diverged, 4);
    }
}

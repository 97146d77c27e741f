//! Scripted checks of the mechanisms behind the local SGD bounds: the
//! quadratic reduction to serial SGD, the bias on non-quadratic objectives,
//! the drift of SGD on the asymmetric scalar objective, and the lower-bound
//! instance.

use serde::{Deserialize, Serialize};

use super::enumerate::{discrepancy, exact_distribution, path_count, ENUMERATION_BUDGET};
use super::grid::{curve_from_estimates, CurvePoint, EtaEstimate, StepsizeGrid};
use super::montecarlo::monte_carlo;
use crate::algorithms::{run, Pattern, RunConfig, StepsizeSchedule};
use crate::error::{invalid, Result};
use crate::problems::{HardInstance, NoiseKind, Objective, QuadraticProblem, ScalarHinge};
use crate::rates::{rate, Convexity, RateName, RateParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationStats {
    pub k: usize,
    pub r: usize,
    pub mean: f64,
    pub variance: f64,
    pub expected_subopt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub t: usize,
    pub m: usize,
    pub eta: f64,
    pub factorizations: Vec<FactorizationStats>,
    /// Largest gap between matched atoms of any two factorizations.
    pub max_discrepancy: f64,
    /// Largest probability-weighted mean gap.
    pub weighted_discrepancy: f64,
    /// Variance of the serial (`M = 1`) iterate after `T` steps.
    pub serial_variance: f64,
    /// `|Var_M - Var_1 / M|`, worst over factorizations.
    pub variance_gap: f64,
}

fn divisors(t: usize) -> Vec<usize> {
    (1..=t).filter(|k| t % k == 0).collect()
}

/// Exact output distribution of local SGD on `problem` for every
/// factorization `K R = T`, compared pairwise.
pub fn invariance_report(problem: &dyn Objective, t: usize, m: usize, eta: f64, x0: Vec<f64>) -> Result<InvarianceReport> {
    if t == 0 || m == 0 {
        return Err(invalid("T and M must be >= 1"));
    }
    let mut dists = Vec::new();
    let mut stats = Vec::new();
    for k in divisors(t) {
        let cfg = RunConfig::new(Pattern::Local, m, k, t / k, eta, 0).with_x0(x0.clone());
        let d = exact_distribution(problem, &cfg)?;
        stats.push(FactorizationStats {
            k,
            r: t / k,
            mean: d.mean_output()[0],
            variance: d.output_variance(0),
            expected_subopt: d.expected_subopt(),
        });
        dists.push(d);
    }
    let serial = exact_distribution(problem, &RunConfig::serial(t, eta, 0).with_x0(x0))?;
    let serial_variance = serial.output_variance(0);
    let mut max_discrepancy: f64 = 0.0;
    let mut weighted_discrepancy: f64 = 0.0;
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            let d = discrepancy(&dists[i], &dists[j])?;
            max_discrepancy = max_discrepancy.max(d.max);
            weighted_discrepancy = weighted_discrepancy.max(d.weighted);
        }
    }
    let variance_gap = stats
        .iter()
        .map(|s| (s.variance - serial_variance / m as f64).abs())
        .fold(0.0, f64::max);
    Ok(InvarianceReport {
        t,
        m,
        eta,
        factorizations: stats,
        max_discrepancy,
        weighted_discrepancy,
        serial_variance,
        variance_gap,
    })
}

/// [`invariance_report`] on `F(x) = x^2/2` with Rademacher noise of scale
/// `sigma`, started from `x0 = 1`.
pub fn verify_quadratic_invariance(t: usize, m: usize, sigma: f64, eta: f64) -> Result<InvarianceReport> {
    let p = QuadraticProblem::scalar(1.0, 0.0, NoiseKind::Rademacher, sigma)?;
    invariance_report(&p, t, m, eta, vec![1.0])
}

/// Exact means of local and minibatch SGD on `x^2 + [x]_+^2 + z x` from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub eta: f64,
    pub sigma: f64,
    pub local_mean: f64,
    pub minibatch_mean: f64,
    pub local_subopt: f64,
    pub minibatch_subopt: f64,
    /// `E x` after each minibatch step.
    pub minibatch_round_means: Vec<f64>,
}

pub fn hinge_counterexample(m: usize, k: usize, r: usize, eta: f64, sigma: f64) -> Result<CounterexampleReport> {
    let p = ScalarHinge::unit(sigma);
    let local = exact_distribution(&p, &RunConfig::new(Pattern::Local, m, k, r, eta, 0))?;
    let mb = exact_distribution(&p, &RunConfig::new(Pattern::Minibatch, m, k, r, eta, 0))?;
    Ok(CounterexampleReport {
        m,
        k,
        r,
        eta,
        sigma,
        local_mean: local.mean_output()[0],
        minibatch_mean: mb.mean_output()[0],
        local_subopt: local.expected_subopt(),
        minibatch_subopt: mb.expected_subopt(),
        minibatch_round_means: (0..r).map(|i| mb.round_mean(i, 0)).collect(),
    })
}

/// SGD on `L/2 (x^2 + [x]_+^2) + z x` from an equiprobable mixture of
/// starting points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTuple {
    pub l: f64,
    pub eta: f64,
    pub sigma: f64,
    pub x0: Vec<f64>,
}

impl DriftTuple {
    pub fn threshold(&self) -> f64 {
        -self.eta * self.sigma / 48.0
    }

    pub fn mean_x0(&self) -> f64 {
        self.x0.iter().sum::<f64>() / self.x0.len() as f64
    }

    pub fn satisfies_hypotheses(&self) -> bool {
        self.l > 0.0
            && self.eta > 0.0
            && self.sigma >= 0.0
            && !self.x0.is_empty()
            && self.l * self.eta <= 0.5
            && self.mean_x0() <= self.threshold()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    pub tuple: DriftTuple,
    pub ex2: f64,
    pub ex3: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub checked: usize,
    pub violations: Vec<DriftCheck>,
    /// `max(E x_t - threshold)` over all tuples and `t in {2, 3}`; negative
    /// when the bound holds everywhere.
    pub worst_margin: f64,
}

/// `(E x_2, E x_3)` exactly.
pub fn drift_moments(tuple: &DriftTuple) -> Result<(f64, f64)> {
    let p = ScalarHinge::new(tuple.l, 0.0, tuple.sigma)?;
    let (mut e2, mut e3) = (0.0, 0.0);
    for &x0 in &tuple.x0 {
        let d = exact_distribution(&p, &RunConfig::serial(3, tuple.eta, 0).with_x0(vec![x0]))?;
        e2 += d.round_mean(1, 0);
        e3 += d.round_mean(2, 0);
    }
    let n = tuple.x0.len() as f64;
    Ok((e2 / n, e3 / n))
}

/// Products of `L`, `L eta`, `sigma` and starting distributions, all
/// satisfying the hypotheses.
pub fn drift_grid() -> Vec<DriftTuple> {
    let mut out = Vec::new();
    for &l in &[0.25, 1.0, 4.0] {
        for &le in &[0.02, 0.1, 0.25, 0.4, 0.5] {
            for &sigma in &[0.5, 1.0, 3.0] {
                let eta = le / l;
                let thr: f64 = -eta * sigma / 48.0;
                let starts: [Vec<f64>; 5] = [
                    vec![thr],
                    vec![4.0 * thr],
                    vec![-2.0 * eta * sigma],
                    vec![2.0 * thr - eta * sigma, 2.0 * thr + eta * sigma],
                    vec![3.0 * thr - 0.5 * eta * sigma, 3.0 * thr, 3.0 * thr + 0.5 * eta * sigma],
                ];
                out.extend(starts.into_iter().map(|x0| DriftTuple { l, eta, sigma, x0 }));
            }
        }
    }
    out
}

pub fn drift_sweep(tuples: &[DriftTuple]) -> Result<DriftReport> {
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for t in tuples {
        if !t.satisfies_hypotheses() {
            return Err(invalid(format!("tuple {t:?} violates L eta <= 1/2 or E x0 <= -eta sigma/48")));
        }
        let (ex2, ex3) = drift_moments(t)?;
        let thr = t.threshold();
        worst = worst.max(ex2 - thr).max(ex3 - thr);
        let ok = ex2 <= thr && ex3 <= thr;
        if !ok {
            violations.push(DriftCheck { tuple: t.clone(), ex2, ex3, ok });
        }
    }
    Ok(DriftReport { checked: tuples.len(), violations, worst_margin: worst })
}

/// Simulated noise-free coordinates of local SGD on the hard instance from
/// the origin, against their closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateCheck {
    pub x1: f64,
    pub x1_closed_form: f64,
    pub x2: f64,
    pub x2_closed_form: f64,
}

impl CoordinateCheck {
    pub fn max_error(&self) -> f64 {
        (self.x1 - self.x1_closed_form).abs().max((self.x2 - self.x2_closed_form).abs())
    }
}

pub fn deterministic_coordinates(inst: &HardInstance, m: usize, k: usize, r: usize, eta: f64, seed: u64) -> Result<CoordinateCheck> {
    let tr = run(inst, &RunConfig::new(Pattern::Local, m, k, r, eta, seed))?;
    let x = tr.final_iterate();
    let kr = (k * r) as i32;
    Ok(CoordinateCheck {
        x1: x[0],
        x1_closed_form: inst.b * (1.0 - (1.0 - eta * inst.mu).powi(kr)),
        x2: x[1],
        x2_closed_form: inst.b * (1.0 - (1.0 - eta * inst.h).powi(kr)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundSpec {
    pub h: f64,
    pub lambda: f64,
    pub b: f64,
    pub sigma: f64,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub grid: StepsizeGrid,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub eta: f64,
    pub local_mean: f64,
    pub local_stderr: f64,
    /// Whether the mean is exact rather than a Monte Carlo estimate.
    pub exact: bool,
    /// `measured / bound`.
    pub ratio: f64,
    /// `H/2 (x2_hat - b)^2`.
    pub coord2_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub spec: LowerBoundSpec,
    pub mu: f64,
    /// Lower-bound expression with unit constant.
    pub bound: f64,
    pub rows: Vec<LowerBoundRow>,
    /// Largest `c` with `measured >= c * bound` at every stepsize.
    pub c_fit: f64,
    pub local_best: CurvePoint,
    pub minibatch_best: CurvePoint,
    /// `(local - minibatch) / sqrt(se_l^2 + se_mb^2)` of the tuned values.
    pub separation_se: f64,
    /// Every stepsize above `2/H` leaves `H/2 (x2_hat - b)^2 >= H b^2 / 2`.
    pub coordinate2_ok: bool,
}

/// Local SGD from the origin on the lower-bound instance for every grid
/// stepsize, compared with the lower-bound expression and with tuned
/// minibatch SGD on the same instance.
pub fn verify_lower_bound(spec: &LowerBoundSpec) -> Result<LowerBoundReport> {
    if spec.k < 2 {
        return Err(invalid("the lower bound is stated for K >= 2"));
    }
    if spec.m == 0 || spec.r == 0 || spec.reps == 0 {
        return Err(invalid("M, R and reps must be >= 1"));
    }
    spec.grid.validate()?;
    let inst = HardInstance::for_horizon(spec.h, spec.lambda, spec.b, spec.sigma, spec.k, spec.r)?;
    let conv = if spec.lambda > 0.0 { Convexity::StronglyConvex } else { Convexity::General };
    let params = RateParams::new(
        spec.h,
        spec.lambda,
        spec.b,
        spec.sigma,
        spec.m as f64,
        spec.k as f64,
        spec.r as f64,
    );
    let bound = rate(RateName::LocalLower, conv, &params)?;

    let local_base = RunConfig::new(Pattern::Local, spec.m, spec.k, spec.r, 1.0, 0);
    let mb_base = RunConfig::new(Pattern::Minibatch, spec.m, spec.k, spec.r, 1.0, 0);
    let enumerable = path_count(&local_base, 2) <= ENUMERATION_BUDGET as f64;

    let mut rows = Vec::new();
    let mut local_est = Vec::new();
    let mut mb_est = Vec::new();
    let mut coordinate2_ok = true;
    for eta in spec.grid.values() {
        let sched = StepsizeSchedule::constant(eta);
        let lc = local_base.clone().with_schedule(sched);
        let est = monte_carlo(&inst, &lc, spec.reps, spec.seed)?;
        let (mean, se) = if enumerable {
            (exact_distribution(&inst, &lc)?.expected_subopt(), 0.0)
        } else {
            (est.mean, est.stderr)
        };
        let quiet = run(&inst.noiseless(), &lc)?;
        let x2 = quiet.final_iterate()[1];
        let coord2 = if quiet.diverged() { f64::INFINITY } else { 0.5 * inst.h * (x2 - inst.b).powi(2) };
        if eta > 2.0 / inst.h && !(coord2 >= 0.5 * inst.h * inst.b * inst.b) {
            coordinate2_ok = false;
        }
        rows.push(LowerBoundRow { eta, local_mean: mean, local_stderr: se, exact: enumerable, ratio: mean / bound, coord2_loss: coord2 });
        local_est.push(EtaEstimate { eta, estimate: est });
        let mc = mb_base.clone().with_schedule(sched);
        mb_est.push(EtaEstimate { eta, estimate: monte_carlo(&inst, &mc, spec.reps, spec.seed)? });
    }
    let c_fit = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let local_best = curve_from_estimates(&local_base, spec.reps, spec.seed, local_est).final_point().clone();
    let minibatch_best = curve_from_estimates(&mb_base, spec.reps, spec.seed, mb_est).final_point().clone();
    let se = (local_best.stderr.powi(2) + minibatch_best.stderr.powi(2)).sqrt();
    let separation_se = (local_best.mean - minibatch_best.mean) / se;
    Ok(LowerBoundReport {
        spec: spec.clone(),
        mu: inst.mu,
        bound,
        rows,
        c_fit,
        local_best,
        minibatch_best,
        separation_se,
        coordinate2_ok,
    })
}

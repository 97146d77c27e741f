//! Brute-force expectations over every noise path of a finite-support run.

use serde::{Deserialize, Serialize};

use crate::algorithms::{run_with_noise, Pattern, RunConfig};
use crate::error::{invalid, Error, Result};
use crate::noise::{NoiseSupport, ScriptedNoise};
use crate::problems::Objective;

/// Largest number of noise paths the oracle will enumerate.
pub const ENUMERATION_BUDGET: u64 = 1 << 22;

/// One equally likely noise path and what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub prob: f64,
    pub output: Vec<f64>,
    pub subopt: f64,
    pub round_iterates: Vec<Vec<f64>>,
    pub round_subopt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub dim: usize,
    pub atoms: Vec<Atom>,
}

/// Exact moments of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactExpectation {
    /// `E[F(output) - F*]`.
    pub subopt: f64,
    /// `E[output]` per coordinate.
    pub mean_output: Vec<f64>,
    /// `E[F(x_r) - F*]` per round.
    pub round_subopt: Vec<f64>,
    /// `E[x_r]` per round and coordinate.
    pub round_mean: Vec<Vec<f64>>,
    pub paths: u64,
}

/// `(noise table rows, machines)` for a config.
fn table_shape(cfg: &RunConfig) -> (usize, usize) {
    match cfg.pattern {
        Pattern::ThumbTwiddling => (cfg.r, cfg.m),
        _ => (cfg.k * cfg.r, cfg.m),
    }
}

/// Number of noise paths of `cfg` under a support of `n` outcomes.
pub fn path_count(cfg: &RunConfig, n: u64) -> f64 {
    let (rows, m) = table_shape(cfg);
    (n as f64).powi((rows * m) as i32)
}

pub fn exact_distribution(problem: &dyn Objective, cfg: &RunConfig) -> Result<ExactDistribution> {
    exact_distribution_with_budget(problem, cfg, ENUMERATION_BUDGET)
}

pub fn exact_distribution_with_budget(
    problem: &dyn Objective,
    cfg: &RunConfig,
    budget: u64,
) -> Result<ExactDistribution> {
    cfg.validate()?;
    let n = match problem.noise_support() {
        NoiseSupport::Finite(n) if n >= 1 => n,
        _ => return Err(Error::NotEnumerable),
    };
    let paths = path_count(cfg, n);
    if paths > budget as f64 {
        return Err(Error::BudgetExceeded { paths, limit: budget });
    }
    let paths = paths as u64;
    let (rows, m) = table_shape(cfg);
    let keys = rows * m;
    let prob = 1.0 / paths as f64;
    let mut table = ScriptedNoise { machines: m as u64, outcomes: vec![0; keys] };
    let mut atoms = Vec::with_capacity(paths as usize);
    for _ in 0..paths {
        let tr = run_with_noise(problem, cfg, &table)?;
        atoms.push(Atom {
            prob,
            output: tr.output,
            subopt: tr.suboptimality,
            round_iterates: tr.round_iterates,
            round_subopt: tr.round_subopt,
        });
        // mixed-radix increment, lowest key fastest
        for o in table.outcomes.iter_mut() {
            *o += 1;
            if *o < n {
                break;
            }
            *o = 0;
        }
    }
    Ok(ExactDistribution { dim: problem.dim(), atoms })
}

impl ExactDistribution {
    fn weighted_mean(&self, f: impl Fn(&Atom) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.prob * f(a)).sum()
    }

    pub fn expected_subopt(&self) -> f64 {
        self.weighted_mean(|a| a.subopt)
    }

    pub fn mean_output(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.weighted_mean(|a| a.output[i])).collect()
    }

    /// `Var(output_i)`.
    pub fn output_variance(&self, i: usize) -> f64 {
        let mu = self.weighted_mean(|a| a.output[i]);
        self.weighted_mean(|a| (a.output[i] - mu).powi(2))
    }

    pub fn round_mean(&self, round: usize, i: usize) -> f64 {
        self.weighted_mean(|a| a.round_iterates[round][i])
    }

    pub fn expectation(&self) -> ExactExpectation {
        let rounds = self.atoms.first().map(|a| a.round_subopt.len()).unwrap_or(0);
        ExactExpectation {
            subopt: self.expected_subopt(),
            mean_output: self.mean_output(),
            round_subopt: (0..rounds).map(|r| self.weighted_mean(|a| a.round_subopt[r])).collect(),
            round_mean: (0..rounds).map(|r| (0..self.dim).map(|i| self.round_mean(r, i)).collect()).collect(),
            paths: self.atoms.len() as u64,
        }
    }

    /// Atoms sorted lexicographically by output, ready for matching.
    fn sorted_outputs(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.atoms.iter().map(|a| a.output.as_slice()).collect();
        v.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        v
    }
}

/// Distance between two equal-weight output distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    /// Largest coordinate gap between matched atoms (`W_inf` in one dimension).
    pub max: f64,
    /// Probability-weighted mean gap (`W_1` in one dimension).
    pub weighted: f64,
}

/// Matches the sorted atoms of `a` and `b`. Both must have the same number
/// of atoms, or one must be a multiple of the other (atoms are then
/// replicated). Only equiprobable distributions are supported.
pub fn discrepancy(a: &ExactDistribution, b: &ExactDistribution) -> Result<Discrepancy> {
    if a.dim != b.dim || a.atoms.is_empty() || b.atoms.is_empty() {
        return Err(invalid("distributions must be non-empty and of equal dimension"));
    }
    let (na, nb) = (a.atoms.len(), b.atoms.len());
    let n = na.max(nb);
    if n % na != 0 || n % nb != 0 {
        return Err(invalid(format!("cannot match {na} atoms against {nb}")));
    }
    let (sa, sb) = (a.sorted_outputs(), b.sorted_outputs());
    let (ra, rb) = (n / na, n / nb);
    let mut max: f64 = 0.0;
    let mut weighted = 0.0;
    for i in 0..n {
        let (x, y) = (sa[i / ra], sb[i / rb]);
        let gap = x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let gap = if gap.is_nan() { f64::INFINITY } else { gap };
        max = max.max(gap);
        weighted += gap / n as f64;
    }
    Ok(Discrepancy { max, weighted })
}

/// Exact `E[F(output) - F*]` together with the per-coordinate mean output.
pub fn exact_expectation(problem: &dyn Objective, cfg: &RunConfig) -> Result<ExactExpectation> {
    Ok(exact_distribution(problem, cfg)?.expectation())
}

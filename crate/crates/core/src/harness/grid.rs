use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::montecarlo::{monte_carlo, EstimateResult};
use crate::algorithms::{RunConfig, StepsizeSchedule};
use crate::error::{invalid, Error, Result};
use crate::problems::Objective;

/// Candidate constant stepsizes, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepsizeGrid {
    /// `lo * 2^(i / per_octave)` for every `i >= 0` not exceeding `hi`.
    LogSpaced { lo: f64, hi: f64, per_octave: u32 },
    Points { points: Vec<f64> },
}

impl Default for StepsizeGrid {
    fn default() -> Self {
        StepsizeGrid::LogSpaced { lo: 2f64.powi(-20), hi: 16.0, per_octave: 2 }
    }
}

impl StepsizeGrid {
    pub fn log_spaced(lo: f64, hi: f64, per_octave: u32) -> Result<Self> {
        let g = StepsizeGrid::LogSpaced { lo, hi, per_octave };
        g.validate()?;
        Ok(g)
    }

    pub fn points(points: Vec<f64>) -> Result<Self> {
        let g = StepsizeGrid::Points { points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if let StepsizeGrid::LogSpaced { lo, hi, per_octave } = self {
            if !(*lo > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo && *per_octave >= 1) {
                return Err(invalid("log grid needs 0 < lo <= hi and per_octave >= 1"));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(invalid("stepsize grid is empty"));
        }
        if v.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("stepsize grid must be positive, finite and strictly increasing"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            StepsizeGrid::Points { points } => points.clone(),
            StepsizeGrid::LogSpaced { lo, hi, per_octave } => {
                let base = lo.log2();
                let top = hi.log2();
                let p = *per_octave as f64;
                let mut out = Vec::new();
                let mut i = 0u32;
                loop {
                    let e = base + i as f64 / p;
                    if e > top + 1e-9 || i > 100_000 {
                        break;
                    }
                    out.push(e.exp2());
                    i += 1;
                }
                out
            }
        }
    }
}

impl FromStr for StepsizeGrid {
    type Err = Error;

    /// `lo:hi:per_octave`, e.g. `1e-3:2:4`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("stepsize grid `{s}` is not lo:hi:per_octave")));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{p}` in `{s}`")));
        let per = parts[2]
            .trim()
            .parse::<u32>()
            .map_err(|_| Error::Config(format!("bad points-per-octave `{}`", parts[2])))?;
        StepsizeGrid::log_spaced(num(parts[0])?, num(parts[1])?, per).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Tuned value at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-based round index.
    pub round: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `None` when every stepsize diverged by this round.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub eta: f64,
    pub estimate: EstimateResult,
}

impl EtaEstimate {
    /// Round-`r` (0-based) mean with any divergence counted as `+inf`.
    pub fn round_value(&self, r: usize) -> f64 {
        if self.estimate.round_diverged[r] > 0 {
            f64::INFINITY
        } else {
            self.estimate.round_mean[r]
        }
    }
}

/// `g(r) = min_eta E[F(x_{r,eta})] - F*` with the minimising stepsizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCurve {
    pub algorithm: String,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub reps: usize,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
    pub per_eta: Vec<EtaEstimate>,
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub eta: f64,
    pub round: usize,
    pub mean_subopt: f64,
    pub stderr: f64,
    pub reps: usize,
    pub argmin_flag: bool,
    pub seed: u64,
}

impl GridCurve {
    pub fn final_point(&self) -> &CurvePoint {
        self.points.last().expect("curve has at least one round")
    }

    /// Every `(eta, round)` estimate, flagged where it attains the curve.
    /// `rounds` (1-based) restricts the output when given.
    pub fn rows(&self, rounds: Option<&[usize]>) -> Vec<SweepRow> {
        let mut out = Vec::new();
        for (ri, pt) in self.points.iter().enumerate() {
            if let Some(sel) = rounds {
                if !sel.contains(&pt.round) {
                    continue;
                }
            }
            for e in &self.per_eta {
                out.push(SweepRow {
                    algorithm: self.algorithm.clone(),
                    m: self.m,
                    k: self.k,
                    r: self.r,
                    eta: e.eta,
                    round: pt.round,
                    mean_subopt: e.round_value(ri),
                    stderr: e.estimate.round_stderr[ri],
                    reps: e.estimate.reps,
                    argmin_flag: pt.eta == Some(e.eta),
                    seed: self.seed,
                });
            }
        }
        out
    }
}

/// Estimates every stepsize in `grid` with `reps` replications (the same
/// replication seeds for every stepsize) and takes the per-round minimum.
/// Ties go to the smaller stepsize.
pub fn grid_search_curve(
    problem: &dyn Objective,
    base: &RunConfig,
    grid: &StepsizeGrid,
    reps: usize,
    seed: u64,
) -> Result<GridCurve> {
    grid.validate()?;
    let mut per_eta = Vec::new();
    for eta in grid.values() {
        let cfg = base.clone().with_schedule(StepsizeSchedule::constant(eta));
        per_eta.push(EtaEstimate { eta, estimate: monte_carlo(problem, &cfg, reps, seed)? });
    }
    Ok(curve_from_estimates(base, reps, seed, per_eta))
}

pub(crate) fn curve_from_estimates(base: &RunConfig, reps: usize, seed: u64, per_eta: Vec<EtaEstimate>) -> GridCurve {
    let points = (0..base.r)
        .map(|ri| {
            let mut best = CurvePoint { round: ri + 1, mean: f64::INFINITY, stderr: 0.0, eta: None };
            for e in &per_eta {
                let v = e.round_value(ri);
                if v < best.mean {
                    best = CurvePoint { round: ri + 1, mean: v, stderr: e.estimate.round_stderr[ri], eta: Some(e.eta) };
                }
            }
            best
        })
        .collect();
    GridCurve {
        algorithm: base.algorithm_name(),
        m: base.m,
        k: base.k,
        r: base.r,
        reps,
        seed,
        points,
        per_eta,
    }
}

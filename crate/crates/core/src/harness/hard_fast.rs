//! Specialised simulator for SGD on [`HardInstance`].
//!
//! Coordinates 1 and 2 never see noise, so they are taken from one
//! noiseless run of the generic engine and shared by all replications. Only
//! the third coordinate is simulated per replication, as a scalar recursion
//! performing the same floating-point operations as the generic engine; for
//! the local and serial patterns the results are bit-identical. Minibatch and
//! thumb-twiddling steps use the count of `+sigma` draws instead of summing
//! per-sample updates, which agrees with the engine to rounding.

use super::montecarlo::Replication;
use crate::algorithms::{run, AveragingScheme, BaseMethod, Pattern, RunConfig, StepsizeSchedule};
use crate::error::{invalid, Result};
use crate::noise::KeyedNoise;
use crate::problems::{HardInstance, Objective};
use crate::vecops::pairwise_mean;

/// Machines advanced together to overlap their dependency chains.
const LANES: usize = 8;

pub(crate) struct HardPlan<'a> {
    inst: &'a HardInstance,
    cfg: RunConfig,
    eta: f64,
    x3_0: f64,
    /// Noiseless round iterates; `None` from the first non-finite round.
    det: Vec<Option<[f64; 2]>>,
}

impl<'a> HardPlan<'a> {
    pub(crate) fn eligible(cfg: &RunConfig) -> bool {
        cfg.method == BaseMethod::Sgd
            && matches!(cfg.schedule, StepsizeSchedule::Constant { .. })
            && cfg.averaging == AveragingScheme::FinalIterate
            && !cfg.record_steps
            && !cfg.record_diagnostics
    }

    pub(crate) fn new(inst: &'a HardInstance, cfg: &RunConfig) -> Result<Self> {
        if !Self::eligible(cfg) {
            return Err(invalid("configuration is not handled by the hard-instance simulator"));
        }
        let eta = cfg.schedule.eta(0);
        let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; 3]);
        if x0.len() != 3 {
            return Err(invalid("hard instance is three-dimensional"));
        }
        let quiet = inst.noiseless();
        let tr = run(&quiet, cfg)?;
        let det = tr
            .round_iterates
            .iter()
            .map(|x| (x[0].is_finite() && x[1].is_finite()).then(|| [x[0], x[1]]))
            .collect();
        Ok(Self { inst, cfg: cfg.clone(), eta, x3_0: x0[2], det })
    }

    #[inline]
    fn z(&self, bit: u64) -> f64 {
        self.inst.noise_value(bit)
    }

    pub(crate) fn replicate(&self, seed: u64) -> Replication {
        let rounds = self.simulate_x3(KeyedNoise::new(seed));
        let mut out = Vec::with_capacity(self.cfg.r);
        let mut dead = false;
        for (x3, det) in rounds.iter().zip(&self.det) {
            if let (false, Some([x1, x2])) = (dead, det) {
                if x3.is_finite() {
                    let v = self.inst.suboptimality(&[*x1, *x2, *x3]);
                    out.push(if v.is_nan() { f64::INFINITY } else { v });
                    continue;
                }
            }
            dead = true;
            out.push(f64::INFINITY);
        }
        let subopt = *out.last().unwrap_or(&f64::INFINITY);
        Replication { round_subopt: out, subopt }
    }

    /// Third coordinate after each round.
    fn simulate_x3(&self, noise: KeyedNoise) -> Vec<f64> {
        let (m, k, r) = (self.cfg.m, self.cfg.k, self.cfg.r);
        let eta = self.eta;
        let mut out = Vec::with_capacity(r);
        let mut x = self.x3_0;
        match self.cfg.pattern {
            Pattern::Local | Pattern::Serial => {
                let zs = [self.z(0), self.z(1)];
                let mut xs = vec![0.0; m];
                for ri in 0..r {
                    for (ci, chunk) in xs.chunks_mut(LANES).enumerate() {
                        let base = (ci * LANES) as u64;
                        let mut y = [x; LANES];
                        let mut word = [0u64; LANES];
                        let lanes = chunk.len();
                        for ki in 0..k {
                            let t = (ri * k + ki) as u64;
                            if ki == 0 || t & 63 == 0 {
                                for j in 0..lanes {
                                    word[j] = noise.sign_word(t >> 6, base + j as u64);
                                }
                            }
                            let sh = t & 63;
                            for j in 0..LANES {
                                let mut g = self.inst.coord3_grad(y[j]);
                                g += zs[((word[j] >> sh) & 1) as usize];
                                y[j] -= eta * g;
                            }
                        }
                        chunk.copy_from_slice(&y[..lanes]);
                    }
                    x = pairwise_mean(&mut xs);
                    out.push(x);
                }
            }
            Pattern::Minibatch | Pattern::ThumbTwiddling => {
                let per = if self.cfg.pattern == Pattern::Minibatch { k } else { 1 };
                let n = (m * per) as f64;
                for ri in 0..r {
                    let (lo, hi) = if per == 1 { (ri as u64, ri as u64 + 1) } else { ((ri * k) as u64, ((ri + 1) * k) as u64) };
                    let ones: u64 = (0..m as u64).map(|mi| count_ones(&noise, mi, lo, hi)).sum();
                    let zbar = self.inst.sigma * (2.0 * ones as f64 - n) / n;
                    let g = self.inst.coord3_grad(x) + zbar;
                    x -= eta * g;
                    out.push(x);
                }
            }
        }
        out
    }
}

/// Number of set sign bits for steps `lo..hi` on `machine`.
fn count_ones(noise: &KeyedNoise, machine: u64, lo: u64, hi: u64) -> u64 {
    let mut total = 0u64;
    let mut t = lo;
    while t < hi {
        let word = noise.sign_word(t >> 6, machine);
        let start = t & 63;
        let end = (hi - (t - start)).min(64);
        let width = end - start;
        let mask = if width == 64 { u64::MAX } else { ((1u64 << width) - 1) << start };
        total += (word & mask).count_ones() as u64;
        t += width;
    }
    total
}

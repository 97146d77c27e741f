use serde::{Deserialize, Serialize};

use super::schedule::StepsizeSchedule;
use crate::error::{invalid, Result};

/// How a run's output point is formed from its iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AveragingScheme {
    /// The last averaged iterate.
    #[default]
    FinalIterate,
    /// Mean of the `R` per-round iterates.
    UniformRounds,
    /// `1/T sum_{t=1}^{T} x_bar_t`.
    UniformAll,
    /// `sum_{t=0}^{T} w_t x_bar_t / W_T` with the staged schedule's weights.
    Weighted,
    /// `1/(M T) sum_m sum_{t=1}^{T} x_t^m`.
    MachineTime,
}

/// `sum_t w_t x_t / sum_t w_t`.
pub fn weighted_output(points: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(invalid("need one weight per point and at least one point"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(invalid("weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(invalid("total weight is zero"));
    }
    let d = points[0].len();
    let mut out = vec![0.0; d];
    for (p, w) in points.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * v;
        }
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(out)
}

/// Online version of the step-level schemes, fed `x_bar_t` as it is
/// produced so per-step iterates need not be stored.
pub(crate) struct StepAverager {
    scheme: AveragingScheme,
    schedule: StepsizeSchedule,
    sum: Vec<f64>,
    total: f64,
    rounds: usize,
}

impl StepAverager {
    pub(crate) fn new(scheme: AveragingScheme, schedule: StepsizeSchedule, d: usize) -> Self {
        Self { scheme, schedule, sum: vec![0.0; d], total: 0.0, rounds: 0 }
    }

    fn add(&mut self, w: f64, x: &[f64]) {
        if w == 0.0 {
            return;
        }
        for (s, v) in self.sum.iter_mut().zip(x) {
            *s += w * v;
        }
        self.total += w;
    }

    /// `x` is the averaged iterate after `t` method steps.
    pub(crate) fn step(&mut self, t: u64, x: &[f64]) {
        match self.scheme {
            AveragingScheme::UniformAll if t >= 1 => self.add(1.0, x),
            AveragingScheme::Weighted => {
                let w = self.schedule.weight(t).unwrap_or(0.0);
                self.add(w, x);
            }
            _ => {}
        }
    }

    pub(crate) fn round(&mut self, x: &[f64]) {
        if self.scheme == AveragingScheme::UniformRounds {
            self.add(1.0, x);
            self.rounds += 1;
        }
    }

    /// The output point; `machine_time` supplies the already reduced
    /// machine-time average for that scheme.
    pub(crate) fn finish(self, last: &[f64], machine_time: Option<Vec<f64>>) -> Result<Vec<f64>> {
        match self.scheme {
            AveragingScheme::FinalIterate => Ok(last.to_vec()),
            AveragingScheme::MachineTime => {
                machine_time.ok_or_else(|| invalid("machine-time average was not accumulated"))
            }
            _ => {
                if self.total <= 0.0 {
                    return Err(invalid("total averaging weight is zero"));
                }
                let t = self.total;
                Ok(self.sum.into_iter().map(|s| s / t).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_give_the_mean() {
        let pts = vec![vec![1.0, 0.0], vec![3.0, 2.0], vec![5.0, 4.0]];
        assert_eq!(weighted_output(&pts, &[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn single_nonzero_weight_selects_a_point() {
        let pts = vec![vec![1.0], vec![-7.5], vec![2.0]];
        assert_eq!(weighted_output(&pts, &[0.0, 4.0, 0.0]).unwrap(), vec![-7.5]);
    }

    #[test]
    fn zero_total_weight_is_an_error() {
        let pts = vec![vec![1.0]];
        assert!(weighted_output(&pts, &[0.0]).is_err());
        assert!(weighted_output(&pts, &[-1.0]).is_err());
    }
}

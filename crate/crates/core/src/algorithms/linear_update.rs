//! First-order methods whose query point and update are fixed affine
//! functions of the state and the observed gradient.
//!
//! The state of a method is a flat vector of `blocks() * d` entries. An
//! execution pattern only ever (a) asks for the query point, (b) applies an
//! update with a gradient, and (c) averages whole states across machines,
//! which is what makes the local, minibatch and serial variants of a method
//! well defined.

use serde::{Deserialize, Serialize};

use super::schedule::StepsizeSchedule;
use crate::error::{invalid, Result};

pub trait LinearUpdate: Send + Sync {
    /// Number of `d`-vectors in the state.
    fn blocks(&self) -> usize;

    /// Block holding the iterate that is reported and evaluated.
    fn output_block(&self) -> usize;

    /// Stepsize in effect at step `t`, for divergence reports.
    fn stepsize(&self, t: u64) -> f64;

    /// Every block starts at `x0`.
    fn init(&self, x0: &[f64], state: &mut [f64]) {
        for block in state.chunks_exact_mut(x0.len()) {
            block.copy_from_slice(x0);
        }
    }

    fn query(&self, state: &[f64], t: u64, out: &mut [f64]);

    /// Advances `state` given the query point it produced and a gradient
    /// observed there.
    fn update(&self, state: &mut [f64], query: &[f64], g: &[f64], t: u64);
}

/// `x_{t+1} = x_t - eta_t g`.
#[derive(Debug, Clone, Copy)]
pub struct Sgd {
    pub schedule: StepsizeSchedule,
}

impl LinearUpdate for Sgd {
    fn blocks(&self) -> usize {
        1
    }

    fn output_block(&self) -> usize {
        0
    }

    fn stepsize(&self, t: u64) -> f64 {
        self.schedule.eta(t)
    }

    fn query(&self, state: &[f64], _t: u64, out: &mut [f64]) {
        out.copy_from_slice(state);
    }

    fn update(&self, state: &mut [f64], _query: &[f64], g: &[f64], t: u64) {
        let eta = self.schedule.eta(t);
        for (x, gi) in state.iter_mut().zip(g) {
            *x -= eta * gi;
        }
    }
}

/// Coefficients of the two-sequence accelerated recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcSaPolicy {
    /// `alpha_t = 2/(t+1)`, `gamma_t = 4 gamma0 / (t (t+1))` for 1-based `t`,
    /// with strong-convexity modulus `mu` (may be 0).
    Accelerated { gamma0: f64, mu: f64 },
    /// `alpha_t = 1` and the prox step equal to the schedule's `eta_t`; the
    /// recursion collapses to plain SGD.
    Unit,
}

impl AcSaPolicy {
    /// `gamma0 = max{2H, (sigma/B) sqrt(2 N (N+1) (N+2) / 3)}` for an
    /// `N`-step run: the smoothness floor, or the value balancing the bias
    /// and noise terms of the convex guarantee.
    pub fn tuned(h: f64, b: f64, sigma: f64, n_steps: u64, mu: f64) -> Self {
        let n = n_steps as f64;
        let noise = sigma / b * (2.0 * n * (n + 1.0) * (n + 2.0) / 3.0).sqrt();
        Self::Accelerated { gamma0: (2.0 * h).max(noise), mu }
    }
}

#[derive(Debug, Clone, Copy)]
struct StepCoefficients {
    /// weight of `x_ag` in the query point
    c_ag: f64,
    /// weight of `x` in the query point
    c_x: f64,
    alpha: f64,
    beta: f64,
    mu: f64,
}

/// AC-SA in the unconstrained Euclidean setting.
///
/// State blocks are `[x, x_ag]`. One step with gradient `G` at `x_md`:
///
/// ```text
/// x_md = c_ag x_ag + c_x x
/// x    <- x - beta (G - mu (x_md - x)),        beta = alpha / (mu + gamma)
/// x_ag <- alpha x + (1 - alpha) x_ag
/// ```
///
/// with `c_ag = (1-alpha)(mu+gamma) / (gamma + (1-alpha^2) mu)` and
/// `c_x = alpha((1-alpha) mu + gamma) / (gamma + (1-alpha^2) mu)`. All three
/// maps are affine with data-independent coefficients.
#[derive(Debug, Clone, Copy)]
pub struct AcSa {
    pub policy: AcSaPolicy,
    pub schedule: StepsizeSchedule,
}

impl AcSa {
    pub fn new(policy: AcSaPolicy, schedule: StepsizeSchedule) -> Result<Self> {
        if let AcSaPolicy::Accelerated { gamma0, mu } = policy {
            if !(gamma0 > 0.0 && gamma0.is_finite() && mu >= 0.0 && mu.is_finite()) {
                return Err(invalid("AC-SA needs gamma0 > 0 and mu >= 0"));
            }
        }
        Ok(Self { policy, schedule })
    }

    fn coefficients(&self, t: u64) -> StepCoefficients {
        match self.policy {
            AcSaPolicy::Unit => {
                StepCoefficients { c_ag: 0.0, c_x: 1.0, alpha: 1.0, beta: self.schedule.eta(t), mu: 0.0 }
            }
            AcSaPolicy::Accelerated { gamma0, mu } => {
                let s = (t + 1) as f64;
                let alpha = 2.0 / (s + 1.0);
                let gamma = 4.0 * gamma0 / (s * (s + 1.0));
                let denom = gamma + (1.0 - alpha * alpha) * mu;
                StepCoefficients {
                    c_ag: (1.0 - alpha) * (mu + gamma) / denom,
                    c_x: alpha * ((1.0 - alpha) * mu + gamma) / denom,
                    alpha,
                    beta: alpha / (mu + gamma),
                    mu,
                }
            }
        }
    }
}

impl LinearUpdate for AcSa {
    fn blocks(&self) -> usize {
        2
    }

    fn output_block(&self) -> usize {
        1
    }

    fn stepsize(&self, t: u64) -> f64 {
        self.coefficients(t).beta
    }

    fn query(&self, state: &[f64], t: u64, out: &mut [f64]) {
        let d = out.len();
        let (x, ag) = state.split_at(d);
        let c = self.coefficients(t);
        if c.c_ag == 0.0 {
            out.copy_from_slice(x);
            return;
        }
        for i in 0..d {
            out[i] = c.c_ag * ag[i] + c.c_x * x[i];
        }
    }

    fn update(&self, state: &mut [f64], query: &[f64], g: &[f64], t: u64) {
        let d = g.len();
        let (x, ag) = state.split_at_mut(d);
        let c = self.coefficients(t);
        if c.mu == 0.0 {
            for i in 0..d {
                x[i] -= c.beta * g[i];
            }
        } else {
            for i in 0..d {
                x[i] -= c.beta * (g[i] - c.mu * (query[i] - x[i]));
            }
        }
        if c.alpha == 1.0 {
            ag.copy_from_slice(x);
        } else {
            for i in 0..d {
                ag[i] = c.alpha * x[i] + (1.0 - c.alpha) * ag[i];
            }
        }
    }
}

/// Method identity as it appears in configs and output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseMethod {
    #[default]
    Sgd,
    AcSa { policy: AcSaPolicy },
}

impl BaseMethod {
    pub fn build(&self, schedule: StepsizeSchedule) -> Result<Box<dyn LinearUpdate>> {
        schedule.validate()?;
        Ok(match *self {
            BaseMethod::Sgd => Box::new(Sgd { schedule }),
            BaseMethod::AcSa { policy } => Box::new(AcSa::new(policy, schedule)?),
        })
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            BaseMethod::Sgd => "sgd",
            BaseMethod::AcSa { .. } => "acsa",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blend(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| w * x + (1.0 - w) * y).collect()
    }

    #[test]
    fn sgd_maps() {
        let sgd = Sgd { schedule: StepsizeSchedule::constant(0.5) };
        let mut q = [0.0; 2];
        sgd.query(&[1.0, 2.0], 0, &mut q);
        assert_eq!(q, [1.0, 2.0]);
        let mut s = [1.0, 2.0];
        sgd.update(&mut s, &q, &[2.0, -2.0], 0);
        assert_eq!(s, [0.0, 3.0]);
    }

    #[test]
    fn acsa_maps_are_affine() {
        let alg = AcSa::new(AcSaPolicy::Accelerated { gamma0: 3.0, mu: 0.2 }, StepsizeSchedule::constant(0.1)).unwrap();
        let s1 = [0.3, -1.2, 2.0, 0.7];
        let s2 = [-0.8, 0.4, 1.1, -0.2];
        let g1 = [0.5, 0.9];
        let g2 = [-1.5, 0.1];
        let w = 0.35;
        for t in [0u64, 1, 5, 40] {
            let (mut q1, mut q2, mut qb) = ([0.0; 2], [0.0; 2], [0.0; 2]);
            alg.query(&s1, t, &mut q1);
            alg.query(&s2, t, &mut q2);
            let sb = blend(&s1, &s2, w);
            alg.query(&sb, t, &mut qb);
            let qexp = blend(&q1, &q2, w);
            for i in 0..2 {
                assert!((qb[i] - qexp[i]).abs() < 1e-12);
            }
            let (mut u1, mut u2, mut ub) = (s1, s2, [0.0; 4]);
            ub.copy_from_slice(&sb);
            alg.update(&mut u1, &q1, &g1, t);
            alg.update(&mut u2, &q2, &g2, t);
            alg.update(&mut ub, &qb, &blend(&g1, &g2, w), t);
            let uexp = blend(&u1, &u2, w);
            for i in 0..4 {
                assert!((ub[i] - uexp[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_policy_is_sgd_bitwise() {
        let sched = StepsizeSchedule::InverseT { lambda: 0.7, a: 3.0 };
        let acsa = AcSa::new(AcSaPolicy::Unit, sched).unwrap();
        let sgd = Sgd { schedule: sched };
        let mut a = vec![0.0; 6];
        acsa.init(&[0.4, -0.3, 1.7], &mut a);
        let mut s = vec![0.4, -0.3, 1.7];
        let mut q = [0.0; 3];
        for t in 0..50 {
            let g = [(t as f64).sin(), (t as f64 * 0.3).cos(), 0.1 * t as f64];
            acsa.query(&a, t, &mut q);
            acsa.update(&mut a, &q.clone(), &g, t);
            sgd.update(&mut s, &[], &g, t);
            assert_eq!(&a[3..], &s[..]);
        }
    }

    #[test]
    fn rejects_bad_policy() {
        assert!(AcSa::new(AcSaPolicy::Accelerated { gamma0: 0.0, mu: 0.0 }, StepsizeSchedule::constant(1.0)).is_err());
    }
}

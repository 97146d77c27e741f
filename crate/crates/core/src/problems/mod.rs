//! Stochastic convex objectives `F(x) = E f(x; z)` and the concrete families
//! used in the experiments.

mod hard;
mod logistic;
mod quadratic;
mod scalar;

pub use hard::{choose_mu, HardForm, HardInstance};
pub use logistic::{
    generate_figure1_dataset, generate_with_params, logistic_objective, GenParams,
    LogisticDataset, LogisticObjective, ReferenceSolution,
};
pub use quadratic::{make_quadratic, NoiseKind, QuadraticProblem};
pub use scalar::ScalarHinge;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::noise::{NoiseDraw, NoiseSupport};

/// Membership parameters of the class `F(H, lambda, B, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassParams {
    pub h: f64,
    pub lambda: f64,
    pub b: f64,
    pub sigma_sq: f64,
}

impl FunctionClassParams {
    pub fn new(h: f64, lambda: f64, b: f64, sigma_sq: f64) -> Result<Self> {
        let p = Self { h, lambda, b, sigma_sq };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.h, self.lambda, self.b, self.sigma_sq];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid(format!("class parameters must be finite and >= 0: {self:?}")));
        }
        if self.b <= 0.0 {
            return Err(invalid("B must be positive"));
        }
        if self.lambda > self.h {
            return Err(invalid(format!("lambda ({}) exceeds H ({})", self.lambda, self.h)));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }
}

/// A stochastic objective. Instances are immutable; all randomness enters
/// through the [`NoiseDraw`] argument.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn params(&self) -> FunctionClassParams;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    fn optimum(&self) -> &[f64];

    fn optimal_value(&self) -> f64;

    fn noise_support(&self) -> NoiseSupport;

    /// `grad f(x; z)` for the realization `draw`.
    fn stochastic_gradient(&self, x: &[f64], draw: NoiseDraw, out: &mut [f64]);

    /// True when `grad F` is affine, which is what the quadratic invariance
    /// results need.
    fn is_quadratic(&self) -> bool {
        false
    }

    fn suboptimality(&self, x: &[f64]) -> f64 {
        self.value(x) - self.optimal_value()
    }

    /// Hook for the specialised simulator of the lower-bound instance.
    fn as_hard_instance(&self) -> Option<&HardInstance> {
        None
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(crate::Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// Maps a finite-support draw to an outcome index, consuming a stream draw
/// when the caller supplied one.
pub(crate) fn finite_outcome(draw: NoiseDraw, n: u64) -> u64 {
    match draw {
        NoiseDraw::Outcome(o) => {
            debug_assert!(o < n);
            o
        }
        NoiseDraw::Stream(mut s) => s.below(n),
    }
}

#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

//! Execution patterns over `M` machines, `K` steps per round and `R` rounds,
//! instantiated with any [`LinearUpdate`] method.
//!
//! | pattern           | sequential steps | gradients per step | noise key          |
//! |-------------------|------------------|--------------------|--------------------|
//! | `local`           | `K R`            | 1 per machine      | `(r K + k, m)`     |
//! | `minibatch`       | `R`              | `M K`              | `(r K + k, m)`     |
//! | `thumb_twiddling` | `R`              | `M`                | `(r, m)`           |
//! | `serial`          | `K R`            | 1                  | `(t, 0)`           |
//!
//! Minibatch and thumb-twiddling steps are computed as the average of the
//! per-sample updates, reduced in the same fixed order as the machine
//! average of local runs. Because both methods are affine in the gradient
//! this is the usual averaged-gradient step, and it makes the degenerate
//! cases of the patterns coincide bit for bit.

mod averaging;
mod engine;
mod linear_update;
mod schedule;

pub use averaging::{weighted_output, AveragingScheme};
pub use engine::{local_run, minibatch_run, run, run_with_noise, serial_run, thumb_twiddling_run};
pub use linear_update::{AcSa, AcSaPolicy, BaseMethod, LinearUpdate, Sgd};
pub use schedule::{tuned_constant_stepsize, StagedVariant, StepsizeSchedule};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Local,
    Minibatch,
    ThumbTwiddling,
    Serial,
}

impl Pattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pattern::Local => "local",
            Pattern::Minibatch => "minibatch",
            Pattern::ThumbTwiddling => "thumb_twiddling",
            Pattern::Serial => "serial",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "local" => Pattern::Local,
            "minibatch" => Pattern::Minibatch,
            "thumb_twiddling" | "thumb-twiddling" | "thumb" => Pattern::ThumbTwiddling,
            "serial" => Pattern::Serial,
            other => return Err(Error::UnknownName(other.to_string())),
        })
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub pattern: Pattern,
    #[serde(default)]
    pub method: BaseMethod,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub schedule: StepsizeSchedule,
    #[serde(default)]
    pub averaging: AveragingScheme,
    pub seed: u64,
    /// Starting point; the origin when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Keep every averaged iterate `x_bar_t`, not only the per-round ones.
    #[serde(default)]
    pub record_steps: bool,
    /// Record the averaged stochastic and full gradients and the machine
    /// dispersion at every step (implies `record_steps`).
    #[serde(default)]
    pub record_diagnostics: bool,
    /// Simulate machines on the rayon pool. Output is unaffected.
    #[serde(default)]
    pub parallel_machines: bool,
}

impl RunConfig {
    pub fn new(pattern: Pattern, m: usize, k: usize, r: usize, eta: f64, seed: u64) -> Self {
        Self {
            pattern,
            method: BaseMethod::Sgd,
            m,
            k,
            r,
            schedule: StepsizeSchedule::constant(eta),
            averaging: AveragingScheme::FinalIterate,
            seed,
            x0: None,
            record_steps: false,
            record_diagnostics: false,
            parallel_machines: false,
        }
    }

    /// A single-machine run of `t` steps, reported after every step.
    pub fn serial(t: usize, eta: f64, seed: u64) -> Self {
        Self::new(Pattern::Serial, 1, 1, t, eta, seed)
    }

    pub fn with_method(mut self, method: BaseMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_schedule(mut self, schedule: StepsizeSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_averaging(mut self, averaging: AveragingScheme) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn recording_steps(mut self) -> Self {
        self.record_steps = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.r == 0 {
            return Err(invalid("M, K and R must all be >= 1"));
        }
        if self.pattern == Pattern::Serial && self.m != 1 {
            return Err(invalid("serial runs use exactly one machine"));
        }
        self.schedule.validate()?;
        if self.averaging == AveragingScheme::Weighted && self.schedule.weight(0).is_none() {
            return Err(invalid("weighted averaging needs a staged schedule"));
        }
        let budget = (self.m as u128) * (self.k as u128) * (self.r as u128);
        if budget > u64::MAX as u128 {
            return Err(invalid("M K R overflows"));
        }
        Ok(())
    }

    /// `T = K R`, the sequential gradient budget of one machine.
    pub fn horizon(&self) -> usize {
        self.k * self.r
    }

    /// `N = M K R`, the total gradient budget.
    pub fn gradient_budget(&self) -> usize {
        let n = self.m * self.k * self.r;
        debug_assert_eq!(n, self.m * self.horizon());
        n
    }

    /// Number of updates the method itself performs.
    pub fn method_steps(&self) -> usize {
        match self.pattern {
            Pattern::Local | Pattern::Serial => self.horizon(),
            Pattern::Minibatch | Pattern::ThumbTwiddling => self.r,
        }
    }

    /// `local`, `minibatch`, ... with an `_acsa` suffix for AC-SA.
    pub fn algorithm_name(&self) -> String {
        match self.method {
            BaseMethod::Sgd => self.pattern.to_string(),
            BaseMethod::AcSa { .. } => format!("{}_acsa", self.pattern),
        }
    }

    pub(crate) fn needs_step_means(&self) -> bool {
        self.record_steps
            || self.record_diagnostics
            || matches!(self.averaging, AveragingScheme::UniformAll | AveragingScheme::Weighted)
    }
}

/// Where a run stopped producing finite iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// 0-based method step whose update was non-finite.
    pub step: u64,
    pub eta: f64,
}

/// Per-step diagnostics of the averaged dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// `g_t`: mean of the stochastic gradients used at step `t`.
    pub mean_stochastic_gradient: Vec<f64>,
    /// `g_bar_t`: mean of the full gradients at the individual query points.
    pub mean_full_gradient: Vec<f64>,
    /// `1/M sum_m |x_bar_t - x_t^m|^2` over the reported iterates.
    pub dispersion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Averaged iterate after each round; length `R`.
    pub round_iterates: Vec<Vec<f64>>,
    /// `F(round iterate) - F*`, `+inf` from the divergence point on.
    pub round_subopt: Vec<f64>,
    /// `x_bar_0 .. x_bar_T` when requested.
    pub step_iterates: Option<Vec<Vec<f64>>>,
    pub diagnostics: Option<Vec<StepDiagnostics>>,
    /// Result of the averaging scheme.
    pub output: Vec<f64>,
    pub suboptimality: f64,
    pub divergence: Option<Divergence>,
}

impl Trajectory {
    pub fn final_iterate(&self) -> &[f64] {
        self.round_iterates.last().map(|v| v.as_slice()).unwrap_or(&self.output)
    }

    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }
}

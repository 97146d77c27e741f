use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which staged strongly convex recipe to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StagedVariant {
    /// Cap `1/(4H)`, decay `2/(8H + lambda s)`, weights `8H/lambda + s`.
    #[default]
    Local,
    /// Cap `1/(2H)`, decay `2/(4H + lambda s)`, weights `(4H/lambda + s)^2`.
    /// Intended for the machine-time average of independent serial runs.
    MachineTime,
}

/// Stepsize `eta_t` as a function of the 0-based sequential step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeSchedule {
    Constant {
        eta: f64,
    },
    /// Constant stepsize tuned for the convex local SGD guarantee.
    ConvexTuned {
        h: f64,
        b: f64,
        sigma: f64,
        m: f64,
        k: u64,
        r: u64,
    },
    /// Constant for the first half of `horizon` steps, then decaying like
    /// `1/(lambda t)`; constant throughout when `horizon <= 2H/lambda`.
    Staged {
        h: f64,
        lambda: f64,
        horizon: u64,
        #[serde(default)]
        variant: StagedVariant,
    },
    /// `eta_t = 2 / (lambda (a + t))`.
    InverseT {
        lambda: f64,
        a: f64,
    },
}

/// `min{1/(4H), B sqrt(M)/(sigma sqrt(KR)), (B^2/(H sigma^2 K^2 R))^(1/3)}`,
/// the last term omitted when `K = 1` or `M = 1`.
pub fn tuned_constant_stepsize(h: f64, b: f64, sigma: f64, m: f64, k: u64, r: u64) -> f64 {
    let cap = 1.0 / (4.0 * h);
    if sigma == 0.0 {
        return cap;
    }
    let kr = (k * r) as f64;
    let mut eta = cap.min(b * m.sqrt() / (sigma * kr.sqrt()));
    if k != 1 && m != 1.0 {
        let kf = k as f64;
        eta = eta.min((b * b / (h * sigma * sigma * kf * kf * r as f64)).cbrt());
    }
    eta
}

impl StepsizeSchedule {
    pub fn constant(eta: f64) -> Self {
        Self::Constant { eta }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { eta } => eta > 0.0 && eta.is_finite(),
            Self::ConvexTuned { h, b, sigma, m, k, r } => {
                h > 0.0 && b > 0.0 && sigma >= 0.0 && m >= 1.0 && k >= 1 && r >= 1 && h.is_finite()
            }
            Self::Staged { h, lambda, horizon, .. } => {
                h > 0.0 && h.is_finite() && lambda > 0.0 && lambda <= h && horizon >= 1
            }
            Self::InverseT { lambda, a } => lambda > 0.0 && lambda.is_finite() && a > 0.0 && a.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid stepsize schedule {self:?}")))
        }
    }

    fn staged_constants(h: f64, variant: StagedVariant) -> (f64, f64) {
        // (constant stepsize, 2 / constant stepsize)
        match variant {
            StagedVariant::Local => (1.0 / (4.0 * h), 8.0 * h),
            StagedVariant::MachineTime => (1.0 / (2.0 * h), 4.0 * h),
        }
    }

    fn staged_is_decaying(h: f64, lambda: f64, horizon: u64) -> bool {
        horizon as f64 > 2.0 * h / lambda
    }

    pub fn eta(&self, t: u64) -> f64 {
        match *self {
            Self::Constant { eta } => eta,
            Self::ConvexTuned { h, b, sigma, m, k, r } => tuned_constant_stepsize(h, b, sigma, m, k, r),
            Self::Staged { h, lambda, horizon, variant } => {
                let (eta0, base) = Self::staged_constants(h, variant);
                if !Self::staged_is_decaying(h, lambda, horizon) {
                    return eta0;
                }
                let half = horizon as f64 / 2.0;
                let s = t as f64 - half;
                let decaying = match variant {
                    StagedVariant::Local => s > 0.0,
                    StagedVariant::MachineTime => s >= 0.0,
                };
                if decaying {
                    2.0 / (base + lambda * s)
                } else {
                    eta0
                }
            }
            Self::InverseT { lambda, a } => 2.0 / (lambda * (a + t as f64)),
        }
    }

    /// Averaging weight `w_t` attached to the iterate after `t` steps, for
    /// the staged schedule; `None` for schedules that carry no weights.
    pub fn weight(&self, t: u64) -> Option<f64> {
        let Self::Staged { h, lambda, horizon, variant } = *self else {
            return None;
        };
        let (eta0, base) = Self::staged_constants(h, variant);
        if !Self::staged_is_decaying(h, lambda, horizon) {
            return Some((1.0 - lambda * eta0).powf(-(t as f64) - 1.0));
        }
        let s = t as f64 - horizon as f64 / 2.0;
        let offset = base / lambda;
        Some(match variant {
            StagedVariant::Local if s > 0.0 => offset + s,
            StagedVariant::MachineTime if s >= 0.0 => (offset + s).powi(2),
            _ => 0.0,
        })
    }

    /// Largest stepsize the schedule can emit.
    pub fn max_eta(&self) -> f64 {
        match *self {
            Self::Staged { h, variant, .. } => Self::staged_constants(h, variant).0,
            Self::InverseT { .. } => self.eta(0),
            _ => self.eta(0),
        }
    }
}

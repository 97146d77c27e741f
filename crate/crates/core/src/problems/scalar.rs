use super::{check_dim, finite_outcome, pos, FunctionClassParams, Objective};
use crate::error::{invalid, Result};
use crate::noise::{NoiseDraw, NoiseSupport};

/// One-dimensional `f(x; z) = L/2 ((x - c)^2 + [x - c]_+^2) + z x` with
/// `z = +-sigma`. With `L = 2`, `c = 0` this is `x^2 + [x]_+^2 + z x`, the
/// smallest non-quadratic example on which local SGD acquires a bias.
#[derive(Debug, Clone)]
pub struct ScalarHinge {
    pub l: f64,
    pub c: f64,
    pub sigma: f64,
    optimum: [f64; 1],
}

impl ScalarHinge {
    pub fn new(l: f64, c: f64, sigma: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite() && c.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid("scalar hinge needs L > 0, finite c, sigma >= 0"));
        }
        Ok(Self { l, c, sigma, optimum: [c] })
    }

    /// `x^2 + [x]_+^2 + z x`.
    pub fn unit(sigma: f64) -> Self {
        Self::new(2.0, 0.0, sigma).expect("valid constants")
    }

    pub fn checked_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(1, x)?;
        Ok(self.value(x))
    }
}

impl Objective for ScalarHinge {
    fn name(&self) -> &str {
        "scalar_hinge"
    }

    fn dim(&self) -> usize {
        1
    }

    fn params(&self) -> FunctionClassParams {
        FunctionClassParams {
            h: 2.0 * self.l,
            lambda: self.l,
            b: self.c.abs().max(f64::MIN_POSITIVE),
            sigma_sq: self.sigma * self.sigma,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let u = x[0] - self.c;
        0.5 * self.l * (u * u + pos(u).powi(2))
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let u = x[0] - self.c;
        out[0] = self.l * u + self.l * pos(u);
    }

    fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    fn optimal_value(&self) -> f64 {
        0.0
    }

    fn noise_support(&self) -> NoiseSupport {
        NoiseSupport::Finite(2)
    }

    fn stochastic_gradient(&self, x: &[f64], draw: NoiseDraw, out: &mut [f64]) {
        self.gradient(x, out);
        out[0] += if finite_outcome(draw, 2) == 1 { self.sigma } else { -self.sigma };
    }
}

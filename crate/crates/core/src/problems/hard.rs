//! The three-coordinate piecewise quadratic on which local SGD with a fixed
//! stepsize is provably worse than minibatch SGD when `K` is small.
//!
//! ```text
//! F(x) = mu/2 (x1 - b)^2 + H/2 (x2 - b)^2 + L/2 ((x3 - c)^2 + [x3 - c]_+^2)
//! grad f(x; z) = grad F(x) + (0, 0, z),   z = +-sigma equiprobable
//! ```
//!
//! The canonical form takes `L = H/4`, so the third coordinate is
//! `H/2`-smooth and `H/4`-strongly convex, and `mu` in `[lambda, H/16]`.
//! Written out, the third-coordinate coefficient is `L/2 = H/8`, which is
//! the coefficient of the single-formula presentation; that presentation
//! differs only in putting `lambda` itself on the first coordinate, which is
//! what [`HardForm::LambdaFirstCoordinate`] selects.

use serde::{Deserialize, Serialize};

use super::{check_dim, finite_outcome, pos, FunctionClassParams, Objective};
use crate::error::{invalid, Result};
use crate::noise::{NoiseDraw, NoiseSupport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HardForm {
    /// `mu` is a free parameter in `[lambda, H/16]`.
    #[default]
    FreeMu,
    /// `mu = lambda`.
    LambdaFirstCoordinate,
}

#[derive(Debug, Clone)]
pub struct HardInstance {
    pub mu: f64,
    pub h: f64,
    pub l: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    lambda: f64,
    optimum: [f64; 3],
}

/// `mu = (H sigma^2 / (3072 B^2 K^2 R^2))^(1/3)` clamped to `[lambda, H/16]`.
pub fn choose_mu(h: f64, lambda: f64, b: f64, sigma: f64, k: usize, r: usize) -> Result<f64> {
    if !(h > 0.0 && b > 0.0 && sigma >= 0.0 && lambda >= 0.0) {
        return Err(invalid("choose_mu needs H > 0, B > 0, sigma >= 0, lambda >= 0"));
    }
    if lambda > h / 16.0 {
        return Err(invalid(format!("lambda ({lambda}) must be <= H/16 ({})", h / 16.0)));
    }
    if k == 0 || r == 0 {
        return Err(invalid("K and R must be >= 1"));
    }
    let kr = (k * r) as f64;
    let raw = (h * sigma * sigma / (3072.0 * b * b * kr * kr)).cbrt();
    Ok(raw.clamp(lambda, h / 16.0))
}

impl HardInstance {
    /// Direct construction from the coordinate parameters, with no class
    /// hypotheses imposed beyond non-negativity.
    pub fn from_parts(mu: f64, h: f64, l: f64, b: f64, c: f64, sigma: f64) -> Result<Self> {
        let fields = [mu, h, l, b, c, sigma];
        if fields.iter().any(|v| !v.is_finite()) || mu < 0.0 || h < 0.0 || l < 0.0 || sigma < 0.0 {
            return Err(invalid("hard instance parameters must be finite, curvatures >= 0"));
        }
        Ok(Self { mu, h, l, b, c, sigma, lambda: mu.min(h).min(l), optimum: [b, b, c] })
    }

    /// The instance in `F(H, lambda, B, sigma^2)` with the given `mu`.
    pub fn new(h: f64, lambda: f64, b: f64, sigma: f64, mu: f64) -> Result<Self> {
        FunctionClassParams::new(h, lambda, b, sigma * sigma)?;
        if lambda > h / 16.0 {
            return Err(invalid("lower-bound construction needs lambda <= H/16"));
        }
        if mu < lambda || mu > h / 16.0 {
            return Err(invalid(format!("mu = {mu} outside [lambda, H/16] = [{lambda}, {}]", h / 16.0)));
        }
        let t = b / 3f64.sqrt();
        let mut inst = Self::from_parts(mu, h, h / 4.0, t, t, sigma)?;
        inst.lambda = lambda;
        Ok(inst)
    }

    pub fn with_form(h: f64, lambda: f64, b: f64, sigma: f64, form: HardForm, k: usize, r: usize) -> Result<Self> {
        let mu = match form {
            HardForm::FreeMu => choose_mu(h, lambda, b, sigma, k, r)?,
            HardForm::LambdaFirstCoordinate => lambda,
        };
        Self::new(h, lambda, b, sigma, mu)
    }

    /// The instance whose `mu` is chosen for horizon `K R`.
    pub fn for_horizon(h: f64, lambda: f64, b: f64, sigma: f64, k: usize, r: usize) -> Result<Self> {
        Self::with_form(h, lambda, b, sigma, HardForm::FreeMu, k, r)
    }

    pub fn checked_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(3, x)?;
        Ok(self.value(x))
    }

    pub fn checked_stochastic_grad(&self, x: &[f64], z: f64) -> Result<[f64; 3]> {
        check_dim(3, x)?;
        let mut g = [0.0; 3];
        self.gradient(x, &mut g);
        g[2] += z;
        Ok(g)
    }

    /// Third-coordinate gradient without noise.
    #[inline]
    pub fn coord3_grad(&self, x3: f64) -> f64 {
        let u = x3 - self.c;
        self.l * u + self.l * pos(u)
    }

    /// Loss contributed by each coordinate.
    pub fn coordinate_losses(&self, x: &[f64]) -> [f64; 3] {
        let u = x[2] - self.c;
        [
            0.5 * self.mu * (x[0] - self.b).powi(2),
            0.5 * self.h * (x[1] - self.b).powi(2),
            0.5 * self.l * (u * u + pos(u).powi(2)),
        ]
    }

    /// The same instance without noise.
    pub fn noiseless(&self) -> Self {
        Self { sigma: 0.0, ..self.clone() }
    }

    #[inline]
    pub fn noise_value(&self, outcome: u64) -> f64 {
        if outcome == 1 {
            self.sigma
        } else {
            -self.sigma
        }
    }
}

impl Objective for HardInstance {
    fn name(&self) -> &str {
        "hard"
    }

    fn dim(&self) -> usize {
        3
    }

    fn params(&self) -> FunctionClassParams {
        FunctionClassParams {
            h: self.h.max(2.0 * self.l).max(self.mu),
            lambda: self.lambda,
            b: crate::vecops::norm(&self.optimum).max(f64::MIN_POSITIVE),
            sigma_sq: self.sigma * self.sigma,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.coordinate_losses(x).iter().sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * (x[0] - self.b);
        out[1] = self.h * (x[1] - self.b);
        out[2] = self.coord3_grad(x[2]);
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
        out[2] += self.noise_value(finite_outcome(draw, 2));
    }

    fn as_hard_instance(&self) -> Option<&HardInstance> {
        Some(self)
    }
}

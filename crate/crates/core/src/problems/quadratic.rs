use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_dim, finite_outcome, FunctionClassParams, Objective};
use crate::error::{invalid, Result};
use crate::noise::{NoiseDraw, NoiseSupport};

/// Additive gradient noise, independent of `x`, with total variance `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Each coordinate is `+-sigma/sqrt(d)` with equal probability.
    #[default]
    Rademacher,
    /// Each coordinate is `N(0, sigma^2/d)`.
    Gaussian,
}

/// Largest dimension for which Rademacher noise is exposed as a finite
/// support of `2^d` outcomes.
const MAX_ENUMERABLE_DIM: usize = 62;

/// `F(x) = 1/2 (x - x*)^T A (x - x*)` with additive noise.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    d: usize,
    matrix: Vec<f64>,
    center: Vec<f64>,
    noise: NoiseKind,
    sigma: f64,
    params: FunctionClassParams,
}

/// Builds a quadratic in `F(H, lambda, B, sigma^2)` with `x* = B e_1`.
///
/// The spectrum is spread linearly over `[lambda, H]` (just `{H}` when
/// `d = 1`) and rotated by a random orthogonal matrix drawn from `seed`.
pub fn make_quadratic(
    h: f64,
    lambda: f64,
    b: f64,
    sigma: f64,
    d: usize,
    noise: NoiseKind,
    seed: u64,
) -> Result<QuadraticProblem> {
    if d == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma must be finite and >= 0"));
    }
    let params = FunctionClassParams::new(h, lambda, b, sigma * sigma)?;

    let eig: Vec<f64> = if d == 1 {
        vec![h]
    } else {
        (0..d).map(|i| h - (h - lambda) * i as f64 / (d - 1) as f64).collect()
    };
    let q = random_orthogonal(d, seed);
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig));
    let a = &q * diag * q.transpose();
    let mut matrix = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            // symmetrize away rounding
            matrix[i * d + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut center = vec![0.0; d];
    center[0] = b;
    Ok(QuadraticProblem { d, matrix, center, noise, sigma, params })
}

fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    if d == 1 {
        return DMatrix::identity(1, 1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

impl QuadraticProblem {
    /// Arbitrary symmetric PSD `matrix` (row-major, `d x d`) and minimizer.
    ///
    /// The class parameters are read off the spectrum; when the center is
    /// the origin any positive `B` is valid and `B = 1` is reported.
    pub fn new(matrix: Vec<f64>, center: Vec<f64>, noise: NoiseKind, sigma: f64) -> Result<Self> {
        let d = center.len();
        if d == 0 || matrix.len() != d * d {
            return Err(invalid("matrix must be d x d with d = center.len() >= 1"));
        }
        for i in 0..d {
            for j in 0..i {
                if (matrix[i * d + j] - matrix[j * d + i]).abs() > 1e-12 {
                    return Err(invalid("matrix must be symmetric"));
                }
            }
        }
        let eig = spectrum(&matrix, d);
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo < -1e-12 {
            return Err(invalid("matrix must be positive semidefinite"));
        }
        let norm = crate::vecops::norm(&center);
        let b = if norm > 0.0 { norm } else { 1.0 };
        let params = FunctionClassParams::new(hi, lo.max(0.0), b, sigma * sigma)?;
        Ok(Self { d, matrix, center, noise, sigma, params })
    }

    /// One-dimensional `F(x) = curvature/2 (x - center)^2`.
    pub fn scalar(curvature: f64, center: f64, noise: NoiseKind, sigma: f64) -> Result<Self> {
        Self::new(vec![curvature], vec![center], noise, sigma)
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn noise_kind(&self) -> NoiseKind {
        self.noise
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Eigenvalues of the curvature matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e = spectrum(&self.matrix, self.d);
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[i * self.d..(i + 1) * self.d];
            *o = crate::vecops::dot(row, v);
        }
    }

    fn coordinate_scale(&self) -> f64 {
        self.sigma / (self.d as f64).sqrt()
    }

    pub fn checked_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x)?;
        Ok(self.value(x))
    }
}

fn spectrum(matrix: &[f64], d: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(d, d, matrix);
    SymmetricEigen::new(m).eigenvalues.iter().cloned().collect()
}

impl Objective for QuadraticProblem {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn params(&self) -> FunctionClassParams {
        self.params
    }

    fn value(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let mut ad = vec![0.0; self.d];
        self.apply(&diff, &mut ad);
        0.5 * crate::vecops::dot(&diff, &ad)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let diff: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.apply(&diff, out);
    }

    fn optimum(&self) -> &[f64] {
        &self.center
    }

    fn optimal_value(&self) -> f64 {
        0.0
    }

    fn noise_support(&self) -> NoiseSupport {
        if self.sigma == 0.0 {
            return NoiseSupport::Finite(1);
        }
        match self.noise {
            NoiseKind::Rademacher if self.d <= MAX_ENUMERABLE_DIM => {
                NoiseSupport::Finite(1u64 << self.d)
            }
            _ => NoiseSupport::Continuous,
        }
    }

    fn stochastic_gradient(&self, x: &[f64], draw: NoiseDraw, out: &mut [f64]) {
        self.gradient(x, out);
        if self.sigma == 0.0 {
            return;
        }
        let s = self.coordinate_scale();
        match (self.noise, self.noise_support()) {
            (NoiseKind::Rademacher, NoiseSupport::Finite(n)) => {
                let bits = finite_outcome(draw, n);
                for (i, o) in out.iter_mut().enumerate() {
                    *o += if (bits >> i) & 1 == 1 { s } else { -s };
                }
            }
            (NoiseKind::Rademacher, _) => {
                let mut stream = match draw {
                    NoiseDraw::Stream(st) => st,
                    NoiseDraw::Outcome(o) => crate::noise::KeyedStream::from_seed(o),
                };
                let mut word = 0u64;
                for (i, o) in out.iter_mut().enumerate() {
                    if i % 64 == 0 {
                        word = rand::RngCore::next_u64(&mut stream);
                    }
                    *o += if (word >> (i % 64)) & 1 == 1 { s } else { -s };
                }
            }
            (NoiseKind::Gaussian, _) => {
                let mut stream = match draw {
                    NoiseDraw::Stream(st) => st,
                    NoiseDraw::Outcome(o) => crate::noise::KeyedStream::from_seed(o),
                };
                for o in out.iter_mut() {
                    let z: f64 = stream.sample(StandardNormal);
                    *o += s * z;
                }
            }
        }
    }

    fn is_quadratic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_noiseless_construction() {
        let q = make_quadratic(1.0, 0.0, 1.0, 0.0, 1, NoiseKind::Rademacher, 0).unwrap();
        assert_eq!(q.value(&[1.0]), 0.0);
        assert!((q.value(&[3.0]) - 2.0).abs() < 1e-15);
        assert_eq!(q.noise_support(), NoiseSupport::Finite(1));
    }

    #[test]
    fn unit_curvature_value_at_origin() {
        let q = make_quadratic(1.0, 1.0, 1.0, 1.0, 1, NoiseKind::Rademacher, 3).unwrap();
        assert_eq!(q.matrix(), &[1.0]);
        assert_eq!(q.value(&[0.0]), 0.5);
    }

    #[test]
    fn spectrum_is_forced_by_construction() {
        let q = make_quadratic(2.0, 0.5, 1.0, 0.0, 2, NoiseKind::Rademacher, 9).unwrap();
        let e = q.eigenvalues();
        assert!((e[0] - 0.5).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12, "{e:?}");
        assert_eq!(q.optimum(), &[1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_quadratic(1.0, 2.0, 1.0, 0.0, 1, NoiseKind::Rademacher, 0).is_err());
        assert!(make_quadratic(1.0, 0.0, 0.0, 0.0, 1, NoiseKind::Rademacher, 0).is_err());
        assert!(make_quadratic(1.0, 0.0, -1.0, 0.0, 1, NoiseKind::Rademacher, 0).is_err());
        assert!(make_quadratic(1.0, 0.0, 1.0, 0.0, 0, NoiseKind::Rademacher, 0).is_err());
    }

    #[test]
    fn gradient_is_affine() {
        let q = make_quadratic(3.0, 0.2, 2.0, 1.0, 4, NoiseKind::Gaussian, 1).unwrap();
        let x = [0.3, -1.0, 2.0, 0.7];
        let y = [-2.0, 0.5, 0.1, 1.5];
        let a = 0.37;
        let blend: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + (1.0 - a) * v).collect();
        let (mut gx, mut gy, mut gb) = (vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]);
        q.gradient(&x, &mut gx);
        q.gradient(&y, &mut gy);
        q.gradient(&blend, &mut gb);
        for i in 0..4 {
            assert!((gb[i] - (a * gx[i] + (1.0 - a) * gy[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn checked_value_rejects_wrong_dimension() {
        let q = make_quadratic(1.0, 0.0, 1.0, 0.0, 2, NoiseKind::Rademacher, 0).unwrap();
        assert!(q.checked_value(&[0.0]).is_err());
    }
}

//! Synthetic logistic regression: Gaussian features with decaying variance and
//! labels drawn from the intersection of two noisy halfspaces.
//!
//! The objective is the empirical logistic loss of a linear model with bias,
//! so the decision variable has dimension `d + 1` (the bias is last). A
//! stochastic gradient is the gradient on one uniformly sampled point.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_dim, finite_outcome, FunctionClassParams, Objective};
use crate::error::{invalid, Error, Result};
use crate::noise::{NoiseDraw, NoiseSupport};

const MAGIC: &[u8; 8] = b"LSGDDATA";
const FORMAT_VERSION: u32 = 1;

const STREAM_PARAMS: u64 = 0;
const STREAM_FEATURES: u64 = 1;
const STREAM_LABELS: u64 = 2;

/// Ground-truth halfspaces and the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub w1: Vec<f64>,
    pub b1: f64,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub seed: u64,
}

/// Numerical minimizer of the empirical loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticDataset {
    pub n: usize,
    pub d: usize,
    /// Row-major `n x d`.
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
    pub gen: GenParams,
    pub reference: ReferenceSolution,
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^s)` without overflow.
fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

/// Draws `n` points in `R^d` with the halfspaces also drawn from `seed`.
pub fn generate_figure1_dataset(n: usize, d: usize, seed: u64) -> Result<LogisticDataset> {
    if d == 0 {
        return Err(invalid("d must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_PARAMS);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let w1: Vec<f64> = (0..d).map(|_| normal()).collect();
    let b1 = normal();
    let w2: Vec<f64> = (0..d).map(|_| normal()).collect();
    let b2 = normal();
    generate_with_params(n, GenParams { w1, b1, w2, b2, seed })
}

/// Draws features and labels for explicitly given halfspaces.
pub fn generate_with_params(n: usize, gen: GenParams) -> Result<LogisticDataset> {
    let d = gen.w1.len();
    if n == 0 || d == 0 || gen.w2.len() != d {
        return Err(invalid("need n >= 1 and halfspaces of equal dimension >= 1"));
    }
    let (features, labels) = sample_points(n, &gen);
    let mut ds = LogisticDataset {
        n,
        d,
        features,
        labels,
        gen,
        reference: ReferenceSolution { x_star: vec![0.0; d + 1], f_star: f64::NAN, grad_norm: f64::NAN },
    };
    ds.reference = solve_reference(&ds)?;
    Ok(ds)
}

fn sample_points(n: usize, gen: &GenParams) -> (Vec<f64>, Vec<u8>) {
    let d = gen.w1.len();
    let scales: Vec<f64> = (1..=d).map(|i| 10f64.sqrt() / i as f64).collect();

    let mut frng = ChaCha8Rng::seed_from_u64(gen.seed);
    frng.set_stream(STREAM_FEATURES);
    let mut features = Vec::with_capacity(n * d);
    for _ in 0..n {
        for s in &scales {
            let z: f64 = frng.sample(StandardNormal);
            features.push(s * z);
        }
    }

    let mut lrng = ChaCha8Rng::seed_from_u64(gen.seed);
    lrng.set_stream(STREAM_LABELS);
    let labels = features
        .chunks_exact(d)
        .map(|x| {
            let s1 = crate::vecops::dot(&gen.w1, x) + gen.b1;
            let s2 = crate::vecops::dot(&gen.w2, x) + gen.b2;
            let p = sigmoid(s1.min(s2));
            let u: f64 = lrng.random();
            u8::from(u < p)
        })
        .collect();
    (features, labels)
}

impl LogisticDataset {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    /// True when regenerating from the stored halfspaces and seed reproduces
    /// the stored points and labels bit for bit.
    pub fn regenerates(&self) -> bool {
        let (f, l) = sample_points(self.n, &self.gen);
        f == self.features && l == self.labels
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(self.n as u64)?;
        w.write_u64::<LittleEndian>(self.d as u64)?;
        w.write_u64::<LittleEndian>(self.gen.seed)?;
        w.write_f64::<LittleEndian>(self.reference.f_star)?;
        w.write_f64::<LittleEndian>(self.reference.grad_norm)?;
        let floats = self
            .gen
            .w1
            .iter()
            .chain([&self.gen.b1])
            .chain(&self.gen.w2)
            .chain([&self.gen.b2])
            .chain(&self.reference.x_star)
            .chain(&self.features);
        for v in floats {
            w.write_f64::<LittleEndian>(*v)?;
        }
        w.write_all(&self.labels)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = r.read_u64::<LittleEndian>()? as usize;
        let d = r.read_u64::<LittleEndian>()? as usize;
        if n == 0 || d == 0 || n.checked_mul(d).is_none() {
            return Err(Error::Format(format!("bad shape {n} x {d}")));
        }
        let seed = r.read_u64::<LittleEndian>()?;
        let f_star = r.read_f64::<LittleEndian>()?;
        let grad_norm = r.read_f64::<LittleEndian>()?;
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut v = vec![0.0; len];
            r.read_f64_into::<LittleEndian>(&mut v)?;
            Ok(v)
        };
        let w1 = read_vec(d)?;
        let b1 = read_vec(1)?[0];
        let w2 = read_vec(d)?;
        let b2 = read_vec(1)?[0];
        let x_star = read_vec(d + 1)?;
        let features = read_vec(n * d)?;
        let mut labels = vec![0u8; n];
        r.read_exact(&mut labels)?;
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Format("labels must be 0 or 1".into()));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self {
            n,
            d,
            features,
            labels,
            gen: GenParams { w1, b1, w2, b2, seed },
            reference: ReferenceSolution { x_star, f_star, grad_norm },
        })
    }
}

fn loss_and_grad(ds: &LogisticDataset, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let d = ds.d;
    let (w, bias) = (&x[..d], x[d]);
    let inv_n = 1.0 / ds.n as f64;
    let mut total = 0.0;
    match grad {
        Some(g) => {
            g.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..ds.n {
                let p = ds.point(i);
                let s = crate::vecops::dot(w, p) + bias;
                let y = ds.labels[i] as f64;
                total += softplus(s) - y * s;
                let r = sigmoid(s) - y;
                for (gj, pj) in g[..d].iter_mut().zip(p) {
                    *gj += r * pj;
                }
                g[d] += r;
            }
            g.iter_mut().for_each(|v| *v *= inv_n);
        }
        None => {
            for i in 0..ds.n {
                let s = crate::vecops::dot(w, ds.point(i)) + bias;
                total += softplus(s) - ds.labels[i] as f64 * s;
            }
        }
    }
    total * inv_n
}

fn hessian(ds: &LogisticDataset, x: &[f64]) -> DMatrix<f64> {
    let d = ds.d;
    let mut hm = DMatrix::zeros(d + 1, d + 1);
    let mut phi = DVector::zeros(d + 1);
    for i in 0..ds.n {
        let p = ds.point(i);
        phi.rows_mut(0, d).copy_from_slice(p);
        phi[d] = 1.0;
        let s = crate::vecops::dot(&x[..d], p) + x[d];
        let q = sigmoid(s);
        hm.ger(q * (1.0 - q), &phi, &phi, 1.0);
    }
    hm / ds.n as f64
}

/// Damped Newton with Armijo backtracking from the origin, run until the
/// gradient norm is at most `1e-10`.
fn solve_reference(ds: &LogisticDataset) -> Result<ReferenceSolution> {
    let dim = ds.d + 1;
    let mut x = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut f = loss_and_grad(ds, &x, Some(&mut g));
    let mut trial = vec![0.0; dim];
    for _ in 0..200 {
        let gn = crate::vecops::norm(&g);
        if gn <= 1e-10 {
            break;
        }
        let mut hm = hessian(ds, &x);
        let mut ridge = 0.0;
        let step = loop {
            if let Some(ch) = hm.clone().cholesky() {
                break ch.solve(&DVector::from_column_slice(&g));
            }
            ridge = if ridge == 0.0 { 1e-12 } else { ridge * 10.0 };
            for j in 0..dim {
                hm[(j, j)] += ridge;
            }
        };
        let slope = -crate::vecops::dot(&g, step.as_slice());
        let mut t = 1.0;
        loop {
            for j in 0..dim {
                trial[j] = x[j] - t * step[j];
            }
            let ft = loss_and_grad(ds, &trial, None);
            if ft <= f + 1e-4 * t * slope || t < 1e-12 {
                break;
            }
            t *= 0.5;
        }
        x.copy_from_slice(&trial);
        f = loss_and_grad(ds, &x, Some(&mut g));
    }
    let grad_norm = crate::vecops::norm(&g);
    if !f.is_finite() || grad_norm > 1e-8 {
        return Err(invalid(format!("reference solver stalled at gradient norm {grad_norm:e}")));
    }
    Ok(ReferenceSolution { x_star: x, f_star: f, grad_norm })
}

/// The empirical-distribution objective over a dataset.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    data: Arc<LogisticDataset>,
    params: FunctionClassParams,
}

pub fn logistic_objective(dataset: Arc<LogisticDataset>) -> Result<LogisticObjective> {
    LogisticObjective::new(dataset)
}

impl LogisticObjective {
    /// Class parameters: `H = lambda_max(E phi phi^T) / 4`, `lambda = 0`,
    /// `B = |x*|`, and `sigma^2 = E |phi|^2`, which bounds the per-sample
    /// gradient variance since `|sigmoid(s) - y| <= 1`.
    pub fn new(data: Arc<LogisticDataset>) -> Result<Self> {
        if data.n == 0 {
            return Err(invalid("empty dataset"));
        }
        if data.reference.x_star.len() != data.d + 1 {
            return Err(invalid("reference solution has the wrong dimension"));
        }
        let d = data.d;
        let mut second = DMatrix::<f64>::zeros(d + 1, d + 1);
        let mut phi = DVector::zeros(d + 1);
        let mut sq = 0.0;
        for i in 0..data.n {
            phi.rows_mut(0, d).copy_from_slice(data.point(i));
            phi[d] = 1.0;
            sq += phi.norm_squared();
            second.ger(1.0, &phi, &phi, 1.0);
        }
        second /= data.n as f64;
        let lmax = second.symmetric_eigenvalues().max();
        let b = crate::vecops::norm(&data.reference.x_star).max(f64::MIN_POSITIVE);
        let params = FunctionClassParams::new(lmax / 4.0, 0.0, b, sq / data.n as f64)?;
        Ok(Self { data, params })
    }

    pub fn dataset(&self) -> &LogisticDataset {
        &self.data
    }

    pub fn checked_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.data.d + 1, x)?;
        Ok(self.value(x))
    }

    fn sample_gradient(&self, x: &[f64], i: usize, out: &mut [f64]) {
        let d = self.data.d;
        let p = self.data.point(i);
        let s = crate::vecops::dot(&x[..d], p) + x[d];
        let r = sigmoid(s) - self.data.labels[i] as f64;
        for (o, pj) in out[..d].iter_mut().zip(p) {
            *o = r * pj;
        }
        out[d] = r;
    }
}

impl Objective for LogisticObjective {
    fn name(&self) -> &str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.data.d + 1
    }

    fn params(&self) -> FunctionClassParams {
        self.params
    }

    fn value(&self, x: &[f64]) -> f64 {
        loss_and_grad(&self.data, x, None)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        loss_and_grad(&self.data, x, Some(out));
    }

    fn optimum(&self) -> &[f64] {
        &self.data.reference.x_star
    }

    fn optimal_value(&self) -> f64 {
        self.data.reference.f_star
    }

    fn noise_support(&self) -> NoiseSupport {
        NoiseSupport::Finite(self.data.n as u64)
    }

    fn stochastic_gradient(&self, x: &[f64], draw: NoiseDraw, out: &mut [f64]) {
        let i = finite_outcome(draw, self.data.n as u64) as usize;
        self.sample_gradient(x, i, out);
    }
}

use std::sync::{Arc, OnceLock};

use localsgd::noise::{KeyedStream, NoiseDraw, NoiseSupport};
use localsgd::problems::{
    generate_figure1_dataset, logistic_objective, make_quadratic, HardInstance, NoiseKind, Objective, ScalarHinge,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn families() -> Vec<Arc<dyn Objective>> {
    static CACHE: OnceLock<Vec<Arc<dyn Objective>>> = OnceLock::new();
    CACHE.get_or_init(build_families).clone()
}

fn build_families() -> Vec<Arc<dyn Objective>> {
    let data = Arc::new(generate_figure1_dataset(400, 6, 3).unwrap());
    vec![
        Arc::new(make_quadratic(2.0, 0.1, 1.0, 0.7, 3, NoiseKind::Rademacher, 4).unwrap()),
        Arc::new(make_quadratic(1.0, 0.0, 2.0, 1.3, 1, NoiseKind::Rademacher, 0).unwrap()),
        Arc::new(HardInstance::for_horizon(1.0, 0.0, 1.0, 1.0, 4, 6).unwrap()),
        Arc::new(HardInstance::new(4.0, 0.2, 2.0, 0.5, 0.2).unwrap()),
        Arc::new(ScalarHinge::new(1.0, 0.0, 1.0).unwrap()),
        Arc::new(ScalarHinge::new(0.5, 0.3, 2.0).unwrap()),
        Arc::new(logistic_objective(data).unwrap()),
    ]
}

fn probe(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn grad(p: &dyn Objective, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; p.dim()];
    p.gradient(x, &mut g);
    g
}

/// Exact mean and `E |g - grad F|^2` over a finite noise support.
fn finite_moments(p: &dyn Objective, x: &[f64], n: u64) -> (Vec<f64>, f64) {
    let full = grad(p, x);
    let mut mean = vec![0.0; p.dim()];
    let mut var = 0.0;
    let mut g = vec![0.0; p.dim()];
    for o in 0..n {
        p.stochastic_gradient(x, NoiseDraw::Outcome(o), &mut g);
        for i in 0..g.len() {
            mean[i] += g[i] / n as f64;
            var += (g[i] - full[i]).powi(2) / n as f64;
        }
    }
    (mean, var)
}

#[test]
fn finite_noise_is_unbiased_with_bounded_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in families() {
        let NoiseSupport::Finite(n) = p.noise_support() else { panic!("{} has continuous noise", p.name()) };
        let sigma_sq = p.params().sigma_sq;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = probe(&mut rng, p.dim());
            let (mean, var) = finite_moments(p.as_ref(), &x, n);
            for (a, b) in mean.iter().zip(grad(p.as_ref(), &x)) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{}: {a} vs {b}", p.name());
            }
            worst = worst.max(var);
        }
        assert!(worst <= 1.05 * sigma_sq, "{}: variance {worst} vs sigma^2 {sigma_sq}", p.name());
    }
}

#[test]
fn gaussian_noise_is_unbiased_with_bounded_variance() {
    let p = make_quadratic(2.0, 0.1, 1.0, 0.7, 3, NoiseKind::Gaussian, 4).unwrap();
    assert_eq!(p.noise_support(), NoiseSupport::Continuous);
    let x = vec![0.4, -1.0, 0.2];
    let full = grad(&p, &x);
    let n = 1_000_000u64;
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    let mut g = vec![0.0; 3];
    for i in 0..n {
        p.stochastic_gradient(&x, NoiseDraw::Stream(KeyedStream::from_seed(i.wrapping_mul(0x9E37_79B9_7F4A_7C15))), &mut g);
        for j in 0..3 {
            let e = g[j] - full[j];
            sum[j] += e;
            sq[j] += e * e;
        }
    }
    let mut total_var = 0.0;
    for j in 0..3 {
        let mean = sum[j] / n as f64;
        let var = sq[j] / n as f64 - mean * mean;
        total_var += var;
        assert!(mean.abs() <= 3.0 * (var / n as f64).sqrt(), "coordinate {j}: mean error {mean}");
    }
    assert!(total_var <= 1.05 * 0.49, "{total_var}");
}

#[test]
fn smoothness_and_convexity_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in families() {
        let c = p.params();
        for _ in 0..1000 {
            let x = probe(&mut rng, p.dim());
            let y = probe(&mut rng, p.dim());
            let g = grad(p.as_ref(), &x);
            let lin: f64 = g.iter().zip(x.iter().zip(&y)).map(|(gi, (xi, yi))| gi * (yi - xi)).sum();
            let gap = p.value(&y) - p.value(&x) - lin;
            let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            let slack = 1e-10 * (1.0 + p.value(&x).abs() + p.value(&y).abs());
            assert!(gap >= c.lambda / 2.0 * d2 - slack, "{}: gap {gap} below lambda bound", p.name());
            assert!(gap <= c.h / 2.0 * d2 + slack, "{}: gap {gap} above H bound", p.name());
        }
    }
}

#[test]
fn hard_instance_coordinates_are_independent() {
    let inst = HardInstance::for_horizon(1.0, 0.0, 1.0, 1.0, 4, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = probe(&mut rng, 3);
        let base = grad(&inst, &x);
        for j in 0..3 {
            let mut y = x.clone();
            y[j] += rng.random_range(-1.0..1.0);
            let moved = grad(&inst, &y);
            for i in (0..3).filter(|&i| i != j) {
                assert_eq!(moved[i].to_bits(), base[i].to_bits(), "coordinate {j} leaked into {i}");
            }
        }
    }
}

proptest! {
    #[test]
    fn optimum_is_a_minimizer(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in families() {
            let x = probe(&mut rng, p.dim());
            prop_assert!(p.suboptimality(&x) >= -1e-12, "{}", p.name());
            prop_assert!(p.suboptimality(p.optimum()).abs() <= 1e-12, "{}", p.name());
        }
    }
}

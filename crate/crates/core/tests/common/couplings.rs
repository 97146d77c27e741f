//! Degenerate cases of the execution patterns coincide bit for bit.

use std::sync::Arc;

use localsgd::algorithms::{run, AcSaPolicy, BaseMethod, Pattern, RunConfig, Trajectory};
use localsgd::problems::{
    generate_figure1_dataset, logistic_objective, make_quadratic, HardInstance, NoiseKind, Objective, ScalarHinge,
};

pub fn families() -> Vec<(&'static str, Arc<dyn Objective>)> {
    let data = Arc::new(generate_figure1_dataset(300, 5, 7).unwrap());
    vec![
        ("quadratic", Arc::new(make_quadratic(2.0, 0.1, 1.0, 0.7, 3, NoiseKind::Gaussian, 4).unwrap())),
        ("quadratic_rademacher", Arc::new(make_quadratic(1.0, 0.0, 1.0, 1.0, 1, NoiseKind::Rademacher, 0).unwrap())),
        ("hard", Arc::new(HardInstance::for_horizon(1.0, 0.0, 1.0, 1.0, 4, 6).unwrap())),
        ("scalar_hinge", Arc::new(ScalarHinge::new(1.0, 0.0, 1.0).unwrap())),
        ("logistic", Arc::new(logistic_objective(data).unwrap())),
    ]
}

fn start(p: &dyn Objective) -> Vec<f64> {
    (0..p.dim()).map(|i| 0.3 - 0.2 * i as f64).collect()
}

fn cfg(p: &dyn Objective, pattern: Pattern, m: usize, k: usize, r: usize, eta: f64, seed: u64, acsa: bool) -> RunConfig {
    let mut c = RunConfig::new(pattern, m, k, r, eta, seed).with_x0(start(p));
    if acsa {
        c = c.with_method(BaseMethod::AcSa { policy: AcSaPolicy::Accelerated { gamma0: 1.0 / eta, mu: 0.0 } });
    }
    c
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn same_rounds(a: &Trajectory, b: &Trajectory) -> bool {
    a.round_iterates.len() == b.round_iterates.len()
        && a.round_iterates.iter().zip(&b.round_iterates).all(|(x, y)| bits(x) == bits(y))
        && bits(&a.output) == bits(&b.output)
}

/// Checks all four identities on every family; the error names the first failure.
pub fn check_all(m: usize, k: usize, r: usize, eta: f64, seed: u64, acsa: bool) -> Result<(), String> {
    let ensure = |ok: bool, what: String| if ok { Ok(()) } else { Err(what) };
    for (name, p) in families() {
        let p = p.as_ref();
        let go = |c: RunConfig| run(p, &c).unwrap();

        let local = go(cfg(p, Pattern::Local, m, 1, r, eta, seed, acsa));
        let thumb = go(cfg(p, Pattern::ThumbTwiddling, m, k, r, eta, seed, acsa));
        let thumb1 = go(cfg(p, Pattern::ThumbTwiddling, m, 1, r, eta, seed, acsa));
        ensure(same_rounds(&local, &thumb1), format!("{name}: local K=1 vs thumb-twiddling"))?;
        // thumb-twiddling only wastes the extra budget
        ensure(same_rounds(&thumb, &thumb1), format!("{name}: thumb-twiddling depends on K"))?;

        let mb1 = go(cfg(p, Pattern::Minibatch, m, 1, r, eta, seed, acsa));
        ensure(same_rounds(&thumb1, &mb1), format!("{name}: thumb-twiddling vs minibatch K=1"))?;

        let local_m1 = go(cfg(p, Pattern::Local, 1, k, r, eta, seed, acsa));
        let serial = go(cfg(p, Pattern::Serial, 1, 1, k * r, eta, seed, acsa));
        let rounds_match = local_m1.round_iterates.len() == r
            && local_m1
                .round_iterates
                .iter()
                .enumerate()
                .all(|(ri, x)| bits(x) == bits(&serial.round_iterates[(ri + 1) * k - 1]));
        ensure(rounds_match && bits(&local_m1.output) == bits(&serial.output), format!("{name}: local M=1 vs serial(KR)"))?;

        let mb11 = go(cfg(p, Pattern::Minibatch, 1, 1, r, eta, seed, acsa));
        let serial_r = go(cfg(p, Pattern::Serial, 1, 1, r, eta, seed, acsa));
        ensure(same_rounds(&mb11, &serial_r), format!("{name}: minibatch M=K=1 vs serial(R)"))?;
    }
    Ok(())
}

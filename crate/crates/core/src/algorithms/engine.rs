use rayon::prelude::*;

use super::averaging::{AveragingScheme, StepAverager};
use super::linear_update::{BaseMethod, LinearUpdate};
use super::schedule::StepsizeSchedule;
use super::{Divergence, Pattern, RunConfig, StepDiagnostics, Trajectory};
use crate::error::{invalid, Result};
use crate::noise::{KeyedNoise, NoiseKey, NoiseSource, NoiseSupport};
use crate::problems::Objective;
use crate::vecops::{all_finite, dist_sq, pairwise_mean_rows};

/// Runs `cfg` with keyed noise derived from `cfg.seed`.
pub fn run(problem: &dyn Objective, cfg: &RunConfig) -> Result<Trajectory> {
    run_with_noise(problem, cfg, &KeyedNoise::new(cfg.seed))
}

fn expect_pattern(cfg: &RunConfig, want: Pattern) -> Result<()> {
    if cfg.pattern != want {
        return Err(invalid(format!("expected a {want} config, got {}", cfg.pattern)));
    }
    Ok(())
}

pub fn local_run(problem: &dyn Objective, cfg: &RunConfig) -> Result<Trajectory> {
    expect_pattern(cfg, Pattern::Local)?;
    run(problem, cfg)
}

pub fn minibatch_run(problem: &dyn Objective, cfg: &RunConfig) -> Result<Trajectory> {
    expect_pattern(cfg, Pattern::Minibatch)?;
    run(problem, cfg)
}

pub fn thumb_twiddling_run(problem: &dyn Objective, cfg: &RunConfig) -> Result<Trajectory> {
    expect_pattern(cfg, Pattern::ThumbTwiddling)?;
    run(problem, cfg)
}

/// `t` sequential steps on one machine, reported after every step.
pub fn serial_run(
    problem: &dyn Objective,
    method: BaseMethod,
    t: usize,
    schedule: StepsizeSchedule,
    averaging: AveragingScheme,
    seed: u64,
) -> Result<Trajectory> {
    if t == 0 {
        return Err(invalid("serial run needs T >= 1"));
    }
    let cfg = RunConfig::serial(t, 1.0, seed)
        .with_method(method)
        .with_schedule(schedule)
        .with_averaging(averaging);
    run(problem, &cfg)
}

/// Runs `cfg` drawing noise from an arbitrary source.
pub fn run_with_noise(problem: &dyn Objective, cfg: &RunConfig, noise: &dyn NoiseSource) -> Result<Trajectory> {
    cfg.validate()?;
    let d = problem.dim();
    let x0 = match &cfg.x0 {
        Some(x) => {
            crate::problems::check_dim(d, x)?;
            x.clone()
        }
        None => vec![0.0; d],
    };
    let alg = cfg.method.build(cfg.schedule)?;
    let ctx = Ctx {
        problem,
        alg: alg.as_ref(),
        noise,
        support: problem.noise_support(),
        d,
        w: alg.blocks() * d,
        out: alg.output_block() * d,
    };
    match cfg.pattern {
        Pattern::Local | Pattern::Serial => run_local(&ctx, cfg, &x0),
        Pattern::Minibatch => run_batched(&ctx, cfg, &x0, cfg.k, |r, k| (r * cfg.k + k) as u64),
        Pattern::ThumbTwiddling => run_batched(&ctx, cfg, &x0, 1, |r, _| r as u64),
    }
}

struct Ctx<'a> {
    problem: &'a dyn Objective,
    alg: &'a dyn LinearUpdate,
    noise: &'a dyn NoiseSource,
    support: NoiseSupport,
    d: usize,
    /// state width
    w: usize,
    /// offset of the reported block inside a state
    out: usize,
}

impl Ctx<'_> {
    fn reported<'s>(&self, state: &'s [f64]) -> &'s [f64] {
        &state[self.out..self.out + self.d]
    }

    /// Query, draw, update. Leaves the query point in `q` and the gradient
    /// in `g`.
    fn machine_step(&self, state: &mut [f64], q: &mut [f64], g: &mut [f64], t: u64, key: NoiseKey) {
        self.alg.query(state, t, q);
        let draw = self.noise.draw(key, self.support);
        self.problem.stochastic_gradient(q, draw, g);
        self.alg.update(state, q, g, t);
    }

    fn subopt(&self, x: &[f64]) -> f64 {
        let v = self.problem.suboptimality(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn mean_reported(&self, states: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        scratch.clear();
        for row in states.chunks_exact(self.w) {
            scratch.extend_from_slice(self.reported(row));
        }
        pairwise_mean_rows(scratch, self.d, out);
    }
}

struct Recorder {
    averager: StepAverager,
    steps: Option<Vec<Vec<f64>>>,
    diagnostics: Option<Vec<StepDiagnostics>>,
    rounds: Vec<Vec<f64>>,
    round_subopt: Vec<f64>,
    machine_time: Option<Vec<f64>>,
}

impl Recorder {
    fn new(cfg: &RunConfig, d: usize) -> Self {
        Self {
            averager: StepAverager::new(cfg.averaging, cfg.schedule, d),
            steps: (cfg.record_steps || cfg.record_diagnostics).then(Vec::new),
            diagnostics: cfg.record_diagnostics.then(Vec::new),
            rounds: Vec::with_capacity(cfg.r),
            round_subopt: Vec::with_capacity(cfg.r),
            machine_time: (cfg.averaging == AveragingScheme::MachineTime).then(|| vec![0.0; d]),
        }
    }

    fn step(&mut self, t: u64, x: &[f64]) {
        self.averager.step(t, x);
        if let Some(s) = self.steps.as_mut() {
            s.push(x.to_vec());
        }
    }

    fn round(&mut self, ctx: &Ctx, x: &[f64]) {
        self.averager.round(x);
        self.rounds.push(x.to_vec());
        self.round_subopt.push(ctx.subopt(x));
    }

    fn finish(mut self, ctx: &Ctx, cfg: &RunConfig, divergence: Option<Divergence>) -> Result<Trajectory> {
        let d = ctx.d;
        if divergence.is_some() {
            while self.rounds.len() < cfg.r {
                self.rounds.push(vec![f64::NAN; d]);
                self.round_subopt.push(f64::INFINITY);
            }
            return Ok(Trajectory {
                round_iterates: self.rounds,
                round_subopt: self.round_subopt,
                step_iterates: self.steps,
                diagnostics: self.diagnostics,
                output: vec![f64::NAN; d],
                suboptimality: f64::INFINITY,
                divergence,
            });
        }
        let last = self.rounds.last().cloned().unwrap_or_default();
        let output = self.averager.finish(&last, self.machine_time)?;
        let suboptimality = ctx.subopt(&output);
        Ok(Trajectory {
            round_iterates: self.rounds,
            round_subopt: self.round_subopt,
            step_iterates: self.steps,
            diagnostics: self.diagnostics,
            output,
            suboptimality,
            divergence: None,
        })
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += v;
    }
}

/// Local pattern; also serves serial runs (`M = 1`).
fn run_local(ctx: &Ctx, cfg: &RunConfig, x0: &[f64]) -> Result<Trajectory> {
    let (m, k, r, d, w) = (cfg.m, cfg.k, cfg.r, ctx.d, ctx.w);
    let mut common = vec![0.0; w];
    ctx.alg.init(x0, &mut common);
    let mut states = common.repeat(m);
    let mut scratch = Vec::with_capacity(m * w);
    let mut mean = vec![0.0; d];
    let machine_time = cfg.averaging == AveragingScheme::MachineTime;
    // per-machine running sums of x_t^m for the machine-time average
    let mut mt_acc = vec![0.0; m * d];

    let mut rec = Recorder::new(cfg, d);
    let step_means = cfg.needs_step_means();
    if step_means {
        rec.step(0, ctx.reported(&common));
    }
    let mut divergence = None;

    'rounds: for ri in 0..r {
        if step_means {
            let mut q = vec![0.0; d];
            let mut g = vec![0.0; d];
            let mut qs = Vec::new();
            let mut gs = Vec::new();
            for ki in 0..k {
                let t = (ri * k + ki) as u64;
                let dispersion = if cfg.record_diagnostics {
                    ctx.mean_reported(&states, &mut scratch, &mut mean);
                    qs.clear();
                    gs.clear();
                    states.chunks_exact(w).map(|row| dist_sq(ctx.reported(row), &mean)).sum::<f64>() / m as f64
                } else {
                    0.0
                };
                for (mi, row) in states.chunks_exact_mut(w).enumerate() {
                    ctx.machine_step(row, &mut q, &mut g, t, NoiseKey::new(t, mi as u64));
                    if cfg.record_diagnostics {
                        qs.extend_from_slice(&q);
                        gs.extend_from_slice(&g);
                    }
                    if divergence.is_none() && !all_finite(row) {
                        divergence = Some(Divergence { step: t, eta: ctx.alg.stepsize(t) });
                    }
                }
                if divergence.is_some() {
                    break 'rounds;
                }
                if cfg.record_diagnostics {
                    rec.diagnostics.as_mut().unwrap().push(diagnostics(ctx, &qs, &mut gs, dispersion));
                }
                if ki + 1 < k {
                    ctx.mean_reported(&states, &mut scratch, &mut mean);
                    rec.step(t + 1, &mean);
                    if machine_time {
                        for (acc, row) in mt_acc.chunks_exact_mut(d).zip(states.chunks_exact(w)) {
                            add_into(acc, ctx.reported(row));
                        }
                    }
                }
            }
        } else {
            let body = |mi: usize, row: &mut [f64], acc: &mut [f64]| -> Option<u64> {
                let mut q = vec![0.0; d];
                let mut g = vec![0.0; d];
                for ki in 0..k {
                    let t = (ri * k + ki) as u64;
                    ctx.machine_step(row, &mut q, &mut g, t, NoiseKey::new(t, mi as u64));
                    if !all_finite(row) {
                        return Some(t);
                    }
                    if machine_time && ki + 1 < k {
                        add_into(acc, &row[ctx.out..ctx.out + d]);
                    }
                }
                None
            };
            let first_bad = if cfg.parallel_machines && m > 1 {
                states
                    .par_chunks_mut(w)
                    .zip(mt_acc.par_chunks_mut(d))
                    .enumerate()
                    .filter_map(|(mi, (row, acc))| body(mi, row, acc))
                    .min()
            } else {
                states
                    .chunks_exact_mut(w)
                    .zip(mt_acc.chunks_exact_mut(d))
                    .enumerate()
                    .filter_map(|(mi, (row, acc))| body(mi, row, acc))
                    .min()
            };
            if let Some(t) = first_bad {
                divergence = Some(Divergence { step: t, eta: ctx.alg.stepsize(t) });
                break 'rounds;
            }
        }

        scratch.clear();
        scratch.extend_from_slice(&states);
        pairwise_mean_rows(&mut scratch, w, &mut common);
        for row in states.chunks_exact_mut(w) {
            row.copy_from_slice(&common);
        }
        let reported = ctx.reported(&common).to_vec();
        if machine_time {
            for acc in mt_acc.chunks_exact_mut(d) {
                add_into(acc, &reported);
            }
        }
        if step_means {
            rec.step(((ri + 1) * k) as u64, &reported);
        }
        rec.round(ctx, &reported);
    }

    if machine_time && divergence.is_none() {
        let mut out = vec![0.0; d];
        pairwise_mean_rows(&mut mt_acc, d, &mut out);
        let t = cfg.horizon() as f64;
        out.iter_mut().for_each(|v| *v /= t);
        rec.machine_time = Some(out);
    }
    rec.finish(ctx, cfg, divergence)
}

fn diagnostics(ctx: &Ctx, qs: &[f64], gs: &mut [f64], dispersion: f64) -> StepDiagnostics {
    let d = ctx.d;
    let mut full = vec![0.0; qs.len()];
    for (q, f) in qs.chunks_exact(d).zip(full.chunks_exact_mut(d)) {
        ctx.problem.gradient(q, f);
    }
    let mut mean_sto = vec![0.0; d];
    let mut mean_full = vec![0.0; d];
    pairwise_mean_rows(gs, d, &mut mean_sto);
    pairwise_mean_rows(&mut full, d, &mut mean_full);
    StepDiagnostics { mean_stochastic_gradient: mean_sto, mean_full_gradient: mean_full, dispersion }
}

/// Minibatch (`per_machine = K`) and thumb-twiddling (`per_machine = 1`).
fn run_batched(
    ctx: &Ctx,
    cfg: &RunConfig,
    x0: &[f64],
    per_machine: usize,
    key_step: impl Fn(usize, usize) -> u64 + Sync,
) -> Result<Trajectory> {
    let (m, r, d, w) = (cfg.m, cfg.r, ctx.d, ctx.w);
    let mut common = vec![0.0; w];
    ctx.alg.init(x0, &mut common);
    let samples = m * per_machine;
    let mut rows = vec![0.0; samples * w];
    let mut grads = if cfg.record_diagnostics { vec![0.0; samples * d] } else { Vec::new() };
    let mut q = vec![0.0; d];
    let mut mt_sum = vec![0.0; d];

    let mut rec = Recorder::new(cfg, d);
    let step_means = cfg.needs_step_means();
    if step_means {
        rec.step(0, ctx.reported(&common));
    }
    let mut divergence = None;

    for ri in 0..r {
        let t = ri as u64;
        ctx.alg.query(&common, t, &mut q);
        let sample = |idx: usize, row: &mut [f64], g: &mut [f64]| {
            let (mi, ki) = (idx / per_machine, idx % per_machine);
            row.copy_from_slice(&common);
            let draw = ctx.noise.draw(NoiseKey::new(key_step(ri, ki), mi as u64), ctx.support);
            ctx.problem.stochastic_gradient(&q, draw, g);
            ctx.alg.update(row, &q, g, t);
        };
        if cfg.record_diagnostics {
            for (idx, (row, g)) in rows.chunks_exact_mut(w).zip(grads.chunks_exact_mut(d)).enumerate() {
                sample(idx, row, g);
            }
        } else if cfg.parallel_machines && samples > 1 {
            rows.par_chunks_mut(w).enumerate().for_each_init(
                || vec![0.0; d],
                |g, (idx, row)| sample(idx, row, g),
            );
        } else {
            let mut g = vec![0.0; d];
            for (idx, row) in rows.chunks_exact_mut(w).enumerate() {
                sample(idx, row, &mut g);
            }
        }
        pairwise_mean_rows(&mut rows, w, &mut common);
        if !all_finite(&common) {
            divergence = Some(Divergence { step: t, eta: ctx.alg.stepsize(t) });
            break;
        }
        if cfg.record_diagnostics {
            let mut mean_sto = vec![0.0; d];
            pairwise_mean_rows(&mut grads, d, &mut mean_sto);
            let mut full = vec![0.0; d];
            ctx.problem.gradient(&q, &mut full);
            rec.diagnostics.as_mut().unwrap().push(StepDiagnostics {
                mean_stochastic_gradient: mean_sto,
                mean_full_gradient: full,
                dispersion: 0.0,
            });
        }
        let reported = ctx.reported(&common).to_vec();
        add_into(&mut mt_sum, &reported);
        if step_means {
            rec.step(t + 1, &reported);
        }
        rec.round(ctx, &reported);
    }

    if cfg.averaging == AveragingScheme::MachineTime && divergence.is_none() {
        let t = r as f64;
        rec.machine_time = Some(mt_sum.into_iter().map(|v| v / t).collect());
    }
    rec.finish(ctx, cfg, divergence)
}

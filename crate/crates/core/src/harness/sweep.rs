use std::sync::Arc;

use super::grid::{grid_search_curve, GridCurve, SweepRow};
use crate::config::{config_for, SweepSpec};
use crate::error::Result;
use crate::problems::Objective;

/// Runs the full product `algorithms x M x K x R`, in that nesting order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<GridCurve>> {
    spec.validate()?;
    let shared: Option<Arc<dyn Objective>> =
        if spec.problem.depends_on_horizon() { None } else { Some(spec.problem.build(1, 1)?) };
    let mut out = Vec::new();
    for alg in &spec.algorithms {
        for &m in &spec.m {
            for &k in &spec.k {
                for &r in &spec.r {
                    let problem = match &shared {
                        Some(p) => p.clone(),
                        None => spec.problem.build(k, r)?,
                    };
                    let lambda = problem.params().lambda;
                    let base = config_for(alg, m, k, r, 1.0, lambda, spec.averaging, spec.x0.clone())?;
                    out.push(grid_search_curve(problem.as_ref(), &base, &spec.eta_grid, spec.reps, spec.seed)?);
                }
            }
        }
    }
    Ok(out)
}

/// CSV rows of every curve, restricted to `spec.rounds` when set.
pub fn sweep_rows(spec: &SweepSpec, curves: &[GridCurve]) -> Vec<SweepRow> {
    curves.iter().flat_map(|c| c.rows(spec.rounds.as_deref())).collect()
}

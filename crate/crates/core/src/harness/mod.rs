//! Experiment orchestration: Monte Carlo estimates, exact enumeration,
//! stepsize grid search and scripted verification suites.

mod enumerate;
mod grid;
mod hard_fast;
mod montecarlo;
mod sweep;
mod verify;

pub use enumerate::{
    discrepancy, exact_distribution, exact_distribution_with_budget, exact_expectation, path_count, Atom,
    Discrepancy, ExactDistribution, ExactExpectation, ENUMERATION_BUDGET,
};
pub use grid::{grid_search_curve, CurvePoint, EtaEstimate, GridCurve, StepsizeGrid, SweepRow};
pub use montecarlo::{monte_carlo, monte_carlo_with, with_workers, EstimateResult, MonteCarloOptions};
pub use verify::{
    deterministic_coordinates, drift_grid, drift_sweep, drift_moments, hinge_counterexample,
    invariance_report, verify_lower_bound, verify_quadratic_invariance, CoordinateCheck, CounterexampleReport,
    DriftCheck, DriftReport, DriftTuple, FactorizationStats, InvarianceReport, LowerBoundReport, LowerBoundRow,
    LowerBoundSpec,
};
pub use sweep::{run_sweep, sweep_rows};

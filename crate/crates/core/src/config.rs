//! Serializable experiment descriptions, loadable from JSON or TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AcSaPolicy, AveragingScheme, BaseMethod, Pattern, RunConfig, StepsizeSchedule};
use crate::error::{Error, Result};
use crate::harness::StepsizeGrid;
use crate::problems::{
    generate_figure1_dataset, logistic_objective, make_quadratic, HardForm, HardInstance, LogisticDataset,
    NoiseKind, Objective, ScalarHinge,
};

fn one() -> usize {
    1
}

fn default_reps() -> usize {
    32
}

fn default_eta() -> f64 {
    0.1
}

/// Where a logistic dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogisticSource {
    Path(PathBuf),
    Generate { n: usize, d: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic {
        #[serde(rename = "H")]
        h: f64,
        lambda: f64,
        #[serde(rename = "B")]
        b: f64,
        sigma: f64,
        #[serde(default = "one")]
        d: usize,
        #[serde(default)]
        noise: NoiseKind,
        #[serde(default)]
        seed: u64,
    },
    Hard {
        #[serde(rename = "H")]
        h: f64,
        #[serde(default)]
        lambda: f64,
        #[serde(rename = "B")]
        b: f64,
        sigma: f64,
        #[serde(default)]
        form: HardForm,
        /// Fixed `mu`; otherwise chosen from `K R` of each run.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
    },
    ScalarHinge {
        #[serde(rename = "L")]
        l: f64,
        #[serde(default)]
        c: f64,
        sigma: f64,
    },
    Logistic(LogisticSource),
}

impl ProblemSpec {
    /// Whether the instance changes with the run's `(K, R)`.
    pub fn depends_on_horizon(&self) -> bool {
        matches!(self, ProblemSpec::Hard { mu: None, form: HardForm::FreeMu, .. })
    }

    /// Builds the objective for a run with `k` local steps and `r` rounds.
    pub fn build(&self, k: usize, r: usize) -> Result<Arc<dyn Objective>> {
        Ok(match self {
            ProblemSpec::Quadratic { h, lambda, b, sigma, d, noise, seed } => {
                Arc::new(make_quadratic(*h, *lambda, *b, *sigma, *d, *noise, *seed)?)
            }
            ProblemSpec::Hard { h, lambda, b, sigma, form, mu } => match mu {
                Some(mu) => Arc::new(HardInstance::new(*h, *lambda, *b, *sigma, *mu)?),
                None => Arc::new(HardInstance::with_form(*h, *lambda, *b, *sigma, *form, k, r)?),
            },
            ProblemSpec::ScalarHinge { l, c, sigma } => Arc::new(ScalarHinge::new(*l, *c, *sigma)?),
            ProblemSpec::Logistic(src) => Arc::new(logistic_objective(Arc::new(src.load()?))?),
        })
    }
}

impl LogisticSource {
    pub fn load(&self) -> Result<LogisticDataset> {
        match self {
            LogisticSource::Path(p) => LogisticDataset::load(p),
            LogisticSource::Generate { n, d, seed } => generate_figure1_dataset(*n, *d, *seed),
        }
    }
}

/// `local`, `minibatch`, `thumb_twiddling`, `serial`, optionally with an
/// `_acsa` suffix selecting AC-SA as the base method.
pub fn parse_algorithm(name: &str) -> Result<(Pattern, bool)> {
    match name.strip_suffix("_acsa") {
        Some(p) => Ok((p.parse()?, true)),
        None => Ok((name.parse()?, false)),
    }
}

/// Run configuration for `algorithm` at a grid stepsize. For AC-SA the grid
/// value is the initial prox stepsize, `gamma0 = 1/eta`.
#[allow(clippy::too_many_arguments)]
pub fn config_for(
    algorithm: &str,
    m: usize,
    k: usize,
    r: usize,
    eta: f64,
    lambda: f64,
    averaging: AveragingScheme,
    x0: Option<Vec<f64>>,
) -> Result<RunConfig> {
    let (pattern, acsa) = parse_algorithm(algorithm)?;
    let (m, k, r) = if pattern == Pattern::Serial { (1, 1, k * r) } else { (m, k, r) };
    let mut cfg = RunConfig::new(pattern, m, k, r, eta, 0).with_averaging(averaging);
    if acsa {
        cfg = cfg.with_method(BaseMethod::AcSa { policy: AcSaPolicy::Accelerated { gamma0: 1.0 / eta, mu: lambda } });
    }
    cfg.x0 = x0;
    Ok(cfg)
}

/// A single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub problem: ProblemSpec,
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    #[serde(rename = "M", default = "one")]
    pub m: usize,
    #[serde(rename = "K", default = "one")]
    pub k: usize,
    #[serde(rename = "R", default = "one")]
    pub r: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Overrides `eta` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<StepsizeSchedule>,
    #[serde(default)]
    pub averaging: AveragingScheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub record_steps: bool,
}

fn default_algorithm() -> String {
    "local".to_string()
}

impl RunSpec {
    pub fn run_config(&self, lambda: f64) -> Result<RunConfig> {
        let mut cfg = config_for(&self.algorithm, self.m, self.k, self.r, self.eta, lambda, self.averaging, self.x0.clone())?;
        if let Some(s) = self.schedule {
            cfg.schedule = s;
        }
        cfg.seed = self.seed;
        cfg.record_steps = self.record_steps;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A grid of runs, each stepsize-tuned per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub problem: ProblemSpec,
    pub algorithms: Vec<String>,
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(rename = "R")]
    pub r: Vec<usize>,
    #[serde(default)]
    pub eta_grid: StepsizeGrid,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// 1-based rounds to emit; every round when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<usize>>,
    #[serde(default)]
    pub averaging: AveragingScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.algorithms.is_empty() || self.m.is_empty() || self.k.is_empty() || self.r.is_empty() {
            return bad("algorithms, M, K and R must be non-empty");
        }
        if self.m.iter().chain(&self.k).chain(&self.r).any(|v| *v == 0) {
            return bad("M, K and R values must be >= 1");
        }
        if self.reps == 0 {
            return bad("reps must be >= 1");
        }
        for a in &self.algorithms {
            parse_algorithm(a).map_err(|e| Error::Config(e.to_string()))?;
        }
        self.eta_grid.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Reads JSON or TOML, chosen by extension (`.toml`, otherwise JSON).
pub fn load_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

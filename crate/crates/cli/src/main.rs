use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use localsgd::algorithms::{run, AveragingScheme};
use localsgd::config::{load_file, LogisticSource, ProblemSpec, RunSpec, SweepSpec};
use localsgd::harness::{
    run_sweep, sweep_rows, verify_lower_bound, verify_quadratic_invariance, with_workers, GridCurve, LowerBoundSpec,
    StepsizeGrid,
};
use localsgd::problems::{generate_figure1_dataset, HardForm, NoiseKind};
use localsgd::rates::{evaluate, Convexity, RateName, RateParams};
use localsgd::record::{fmt_f64, write_sweep_csv, RunRecord};
use localsgd::Error;

/// Tolerance of the quadratic verification suite.
const QUADRATIC_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "localsgd", version, about = "Local SGD, minibatch SGD and friends: simulation, rates and verification suites")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON or TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Record wall time in run records and report it on standard error.
    #[arg(long)]
    wall_time: bool,
}

#[derive(Args, Debug, Clone, Default)]
struct ClassArgs {
    #[arg(long = "H")]
    h: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "B")]
    b: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct ProblemArgs {
    /// quadratic, hard, scalar_hinge or logistic.
    #[arg(long)]
    problem: Option<String>,
    /// Dataset file for the logistic problem.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dimension of a quadratic problem.
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    class: ClassArgs,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// One run; writes a JSON record.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long = "M")]
        m: Option<usize>,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "R")]
        r: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        /// final_iterate, uniform_rounds, uniform_all, weighted or machine_time.
        #[arg(long)]
        averaging: Option<String>,
    },
    /// Stepsize-tuned sweep; writes CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Evaluates rate expressions.
    Rates {
        #[command(flatten)]
        common: Common,
        /// Rate name; every rate when absent.
        #[arg(long)]
        name: Option<String>,
        /// general or strongly_convex.
        #[arg(long, default_value = "general")]
        convexity: String,
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long = "M")]
        m: Option<f64>,
        #[arg(long = "K")]
        k: Option<f64>,
        #[arg(long = "R")]
        r: Option<f64>,
    },
    /// Logistic-regression comparison of local, minibatch and thumb-twiddling SGD.
    Figure1 {
        #[command(flatten)]
        common: Common,
        /// Existing dataset file; generated from --n, --d and --seed otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 25)]
        d: usize,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Exact comparison of all factorizations K R = T on a quadratic.
    VerifyQuadratic {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T", default_value_t = 4)]
        t: usize,
        #[arg(long = "M", default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.3)]
        eta: f64,
    },
    /// Local SGD on the lower-bound instance against the bound and minibatch.
    VerifyLowerbound {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long = "M", default_value_t = 256)]
        m: usize,
        #[arg(long = "K", default_value_t = 2)]
        k: usize,
        #[arg(long = "R", default_value_t = 64)]
        r: usize,
        #[arg(long = "eta-grid", default_value = "0.015625:2:2")]
        eta_grid: StepsizeGrid,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
    /// Writes the synthetic logistic dataset and prints its F*.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50_000)]
        n: usize,
        #[arg(long, default_value_t = 25)]
        d: usize,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct SweepArgs {
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',')]
    algorithm: Option<Vec<String>>,
    #[arg(long = "M", value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long = "K", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long = "R", value_delimiter = ',')]
    r: Option<Vec<usize>>,
    /// lo:hi:per_octave
    #[arg(long = "eta-grid")]
    eta_grid: Option<StepsizeGrid>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated 1-based rounds to emit.
    #[arg(long, value_delimiter = ',')]
    rounds: Option<Vec<usize>>,
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
    }
}

fn common_of(cmd: &Cmd) -> &Common {
    match cmd {
        Cmd::Run { common, .. }
        | Cmd::Sweep { common, .. }
        | Cmd::Rates { common, .. }
        | Cmd::Figure1 { common, .. }
        | Cmd::VerifyQuadratic { common, .. }
        | Cmd::VerifyLowerbound { common, .. }
        | Cmd::GenData { common, .. } => common,
    }
}

fn dispatch(cmd: Cmd) -> Outcome {
    let common = common_of(&cmd).clone();
    let start = Instant::now();
    let res = with_workers(common.workers, move || execute(cmd))?;
    if common.wall_time {
        eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    }
    res
}

fn execute(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Run { common, problem, algorithm, m, k, r, eta, averaging } => {
            let mut spec: RunSpec = match &common.config {
                Some(p) => load_file(p)?,
                None => RunSpec {
                    problem: problem_from_flags(&problem, common.seed)?,
                    algorithm: "local".into(),
                    m: 1,
                    k: 1,
                    r: 1,
                    eta: 0.1,
                    schedule: None,
                    averaging: AveragingScheme::FinalIterate,
                    seed: 0,
                    x0: None,
                    record_steps: false,
                },
            };
            if common.config.is_some() && problem.problem.is_some() {
                spec.problem = problem_from_flags(&problem, common.seed)?;
            }
            override_opt(&mut spec.algorithm, algorithm);
            override_opt(&mut spec.m, m);
            override_opt(&mut spec.k, k);
            override_opt(&mut spec.r, r);
            override_opt(&mut spec.eta, eta);
            override_opt(&mut spec.seed, common.seed);
            if let Some(a) = averaging {
                spec.averaging = serde_json::from_value(serde_json::Value::String(a.clone()))
                    .map_err(|_| Failure::Usage(format!("unknown averaging scheme `{a}`")))?;
            }
            let objective = spec.problem.build(spec.k, spec.r)?;
            let cfg = spec.run_config(objective.params().lambda)?;
            let started = Instant::now();
            let tr = run(objective.as_ref(), &cfg)?;
            let mut record = RunRecord::new(&spec, &tr);
            if common.wall_time {
                record = record.with_wall_time(started.elapsed().as_secs_f64());
            }
            let json = serde_json::to_string_pretty(&record)?;
            emit(&common.out, |w| writeln!(w, "{json}"))
        }
        Cmd::Sweep { common, problem, sweep } => {
            let mut spec: SweepSpec = match &common.config {
                Some(p) => load_file(p)?,
                None => SweepSpec {
                    problem: problem_from_flags(&problem, common.seed)?,
                    algorithms: vec!["local".into(), "minibatch".into()],
                    m: vec![1],
                    k: vec![1],
                    r: vec![1],
                    eta_grid: StepsizeGrid::default(),
                    reps: 32,
                    seed: 0,
                    rounds: None,
                    averaging: AveragingScheme::FinalIterate,
                    x0: None,
                },
            };
            if common.config.is_some() && problem.problem.is_some() {
                spec.problem = problem_from_flags(&problem, common.seed)?;
            }
            apply_sweep_overrides(&mut spec, sweep, common.seed);
            run_and_write_sweep(&spec, &common.out)
        }
        Cmd::Rates { common, name, convexity, class, m, k, r } => {
            let conv: Convexity = convexity.parse()?;
            let p = RateParams::new(
                class.h.unwrap_or(1.0),
                class.lambda.unwrap_or(0.0),
                class.b.unwrap_or(1.0),
                class.sigma.unwrap_or(1.0),
                m.unwrap_or(1.0),
                k.unwrap_or(1.0),
                r.unwrap_or(1.0),
            );
            match name {
                Some(n) if common.out.is_none() => {
                    let e = evaluate(n.parse()?, conv, &p)?;
                    println!("{:?}", e.value);
                    Ok(())
                }
                other => {
                    let names = match other {
                        Some(n) => vec![n.parse::<RateName>()?],
                        None => RateName::ALL.to_vec(),
                    };
                    emit(&common.out, |w| {
                        writeln!(w, "name,convexity,H,lambda,B,sigma,M,K,R,value,dominant_term")?;
                        for n in &names {
                            let (v, dom) = match evaluate(*n, conv, &p) {
                                Ok(e) => (fmt_f64(e.value), e.dominant_term.to_string()),
                                Err(_) => ("nan".to_string(), "out_of_range".to_string()),
                            };
                            writeln!(
                                w,
                                "{n},{conv},{},{},{},{},{},{},{},{v},\"{dom}\"",
                                fmt_f64(p.h),
                                fmt_f64(p.lambda),
                                fmt_f64(p.b),
                                fmt_f64(p.sigma),
                                fmt_f64(p.m),
                                fmt_f64(p.k),
                                fmt_f64(p.r)
                            )?;
                        }
                        Ok(())
                    })
                }
            }
        }
        Cmd::Figure1 { common, data, n, d, sweep } => {
            let seed = common.seed.unwrap_or(0);
            let source = match data {
                Some(p) => LogisticSource::Path(p),
                None => LogisticSource::Generate { n, d, seed },
            };
            let mut spec = match &common.config {
                Some(p) => load_file(p)?,
                None => SweepSpec {
                    problem: ProblemSpec::Logistic(source),
                    algorithms: vec!["local".into(), "minibatch".into(), "thumb_twiddling".into()],
                    m: vec![1, 10, 100],
                    k: vec![5, 40, 200],
                    r: vec![100],
                    eta_grid: StepsizeGrid::default(),
                    reps: 32,
                    seed,
                    rounds: None,
                    averaging: AveragingScheme::FinalIterate,
                    x0: None,
                },
            };
            apply_sweep_overrides(&mut spec, sweep, common.seed);
            run_and_write_sweep(&spec, &common.out)
        }
        Cmd::VerifyQuadratic { common, t, m, sigma, eta } => {
            let rep = verify_quadratic_invariance(t, m, sigma, eta)?;
            let json = serde_json::to_string_pretty(&rep)?;
            emit(&common.out, |w| writeln!(w, "{json}"))?;
            if rep.max_discrepancy > QUADRATIC_TOL {
                return Err(Failure::Verification(format!("max discrepancy {:e} > {QUADRATIC_TOL:e}", rep.max_discrepancy)));
            }
            if rep.variance_gap > QUADRATIC_TOL {
                return Err(Failure::Verification(format!("variance gap {:e} > {QUADRATIC_TOL:e}", rep.variance_gap)));
            }
            Ok(())
        }
        Cmd::VerifyLowerbound { common, class, m, k, r, eta_grid, reps } => {
            let spec = LowerBoundSpec {
                h: class.h.unwrap_or(1.0),
                lambda: class.lambda.unwrap_or(0.0),
                b: class.b.unwrap_or(1.0),
                sigma: class.sigma.unwrap_or(1.0),
                m,
                k,
                r,
                grid: eta_grid,
                reps,
                seed: common.seed.unwrap_or(0),
            };
            let rep = verify_lower_bound(&spec)?;
            let json = serde_json::to_string_pretty(&rep)?;
            emit(&common.out, |w| writeln!(w, "{json}"))?;
            if !rep.coordinate2_ok {
                return Err(Failure::Verification("stepsize above 2/H left coordinate 2 below H b^2/2".into()));
            }
            if !(rep.c_fit > 0.0) {
                return Err(Failure::Verification(format!("fitted constant {} is not positive", rep.c_fit)));
            }
            Ok(())
        }
        Cmd::GenData { common, n, d } => {
            let out = common.out.ok_or_else(|| Failure::Usage("gen-data needs --out".into()))?;
            let ds = generate_figure1_dataset(n, d, common.seed.unwrap_or(0))?;
            ds.save(&out)?;
            println!("{:?}", ds.reference.f_star);
            Ok(())
        }
    }
}

fn override_opt<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_sweep_overrides(spec: &mut SweepSpec, a: SweepArgs, seed: Option<u64>) {
    override_opt(&mut spec.algorithms, a.algorithm);
    override_opt(&mut spec.m, a.m);
    override_opt(&mut spec.k, a.k);
    override_opt(&mut spec.r, a.r);
    override_opt(&mut spec.eta_grid, a.eta_grid);
    override_opt(&mut spec.reps, a.reps);
    override_opt(&mut spec.seed, seed);
    if a.rounds.is_some() {
        spec.rounds = a.rounds;
    }
}

fn run_and_write_sweep(spec: &SweepSpec, out: &Option<PathBuf>) -> Outcome {
    let curves = run_sweep(spec)?;
    summarize(&curves);
    let rows = sweep_rows(spec, &curves);
    emit(out, |w| write_sweep_csv(w, spec, &rows).map_err(|e| io::Error::other(e.to_string())))
}

/// Final-round tuned values on standard error.
fn summarize(curves: &[GridCurve]) {
    for c in curves {
        let p = c.final_point();
        eprintln!(
            "{:>16} M={:<4} K={:<4} R={:<4} g(R)={} +- {} eta={}",
            c.algorithm,
            c.m,
            c.k,
            c.r,
            fmt_f64(p.mean),
            fmt_f64(p.stderr),
            p.eta.map(fmt_f64).unwrap_or_else(|| "none".into())
        );
    }
}

fn problem_from_flags(p: &ProblemArgs, seed: Option<u64>) -> Result<ProblemSpec, Failure> {
    let c = &p.class;
    let (h, lambda, b, sigma) = (c.h.unwrap_or(1.0), c.lambda.unwrap_or(0.0), c.b.unwrap_or(1.0), c.sigma.unwrap_or(1.0));
    Ok(match p.problem.as_deref() {
        None | Some("quadratic") => ProblemSpec::Quadratic {
            h,
            lambda,
            b,
            sigma,
            d: p.d.unwrap_or(1),
            noise: NoiseKind::Rademacher,
            seed: seed.unwrap_or(0),
        },
        Some("hard") => ProblemSpec::Hard { h, lambda, b, sigma, form: HardForm::FreeMu, mu: None },
        Some("scalar_hinge") => ProblemSpec::ScalarHinge { l: h / 2.0, c: 0.0, sigma },
        Some("logistic") => match &p.data {
            Some(path) => ProblemSpec::Logistic(LogisticSource::Path(path.clone())),
            None => return Err(Failure::Usage("the logistic problem needs --data PATH".into())),
        },
        Some(other) => return Err(Failure::Usage(format!("unknown problem `{other}`"))),
    })
}

fn emit(out: &Option<PathBuf>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

fn create(p: &Path) -> io::Result<File> {
    if let Some(dir) = p.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    File::create(p)
}

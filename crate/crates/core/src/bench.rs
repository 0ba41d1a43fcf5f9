//! Experiment harness: offline benchmark, regret ledger, multi-trial runs
//! and window sweeps.
//!
//! Trials and algorithm runs are independent jobs with their own seeded
//! streams. Results are merged in job order, so output does not depend on
//! the number of workers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{FtlPolicy, FtpPolicy, OgdPolicy, StaticPolicy};
use crate::error::{param_err, shape_err, Error, Result};
use crate::model::{switching_unchecked, Assignment, ProblemShape, TrafficSeries, TrafficVector};
use crate::objective::{Makespan, Objective};
use crate::online::{run_online, OnlinePolicy, OnlineRun};
use crate::plan::{PlanningPolicy, WindowRule, DEFAULT_S_MAX};
use crate::predict::{GpForecastConfig, GpPredictor, Predictor};
use crate::rng::{derive_seed, stream};
use crate::solve::{PlanResult, PlanSolver, PlanningProblem, SubproblemStrategy};
use crate::traffic::{generate_traffic, TrafficGenConfig, TrafficParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Static,
    Ogd,
    Ftl,
    Ftp,
    /// Fixed windows of size 1.
    ShortTerm,
    /// Fixed windows of the configured long-term size.
    LongTerm,
    Dynamic,
    Fixed(usize),
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Static,
        Algorithm::Ogd,
        Algorithm::Ftl,
        Algorithm::Ftp,
        Algorithm::ShortTerm,
        Algorithm::LongTerm,
        Algorithm::Dynamic,
    ];

    fn label(&self) -> u64 {
        match self {
            Algorithm::Static => 1,
            Algorithm::Ogd => 2,
            Algorithm::Ftl => 3,
            Algorithm::Ftp => 4,
            Algorithm::ShortTerm => 5,
            Algorithm::LongTerm => 6,
            Algorithm::Dynamic => 7,
            Algorithm::Fixed(s) => 100 + *s as u64,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Static => f.write_str("static"),
            Algorithm::Ogd => f.write_str("ogd"),
            Algorithm::Ftl => f.write_str("ftl"),
            Algorithm::Ftp => f.write_str("ftp"),
            Algorithm::ShortTerm => f.write_str("short-term"),
            Algorithm::LongTerm => f.write_str("long-term"),
            Algorithm::Dynamic => f.write_str("dynamic"),
            Algorithm::Fixed(s) => write!(f, "fixed-{s}"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "static" => Algorithm::Static,
            "ogd" => Algorithm::Ogd,
            "ftl" => Algorithm::Ftl,
            "ftp" => Algorithm::Ftp,
            "short-term" => Algorithm::ShortTerm,
            "long-term" => Algorithm::LongTerm,
            "dynamic" => Algorithm::Dynamic,
            other => match other.strip_prefix("fixed-").and_then(|n| n.parse().ok()) {
                Some(size) if size >= 1 => Algorithm::Fixed(size),
                _ => {
                    return param_err(format!(
                        "unknown algorithm `{other}` (expected static, ogd, ftl, ftp, short-term, long-term, dynamic or fixed-N)"
                    ))
                }
            },
        })
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything needed to reproduce an experiment. Only `k` is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub k: usize,
    #[serde(default = "defaults::m")]
    pub m: usize,
    /// Fixed per-server unit switching costs. When absent each trial draws
    /// them uniformly from `unit_cost_range`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_costs: Option<Vec<f64>>,
    #[serde(default = "defaults::unit_cost_range")]
    pub unit_cost_range: [f64; 2],
    #[serde(default = "defaults::warmup")]
    pub warmup: usize,
    #[serde(default = "defaults::online_steps")]
    pub online_steps: usize,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default = "defaults::algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "defaults::benchmark_chunk")]
    pub benchmark_chunk: usize,
    #[serde(default = "defaults::s_max")]
    pub s_max: usize,
    #[serde(default = "defaults::long_term_window")]
    pub long_term_window: usize,
    /// Window solver for the planning algorithms.
    #[serde(default)]
    pub solver: PlanSolver,
    /// Chunk solver for the offline benchmark; chosen from the state-space
    /// size when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark_solver: Option<PlanSolver>,
    #[serde(default = "defaults::ftl_strategy")]
    pub ftl_strategy: SubproblemStrategy,
    #[serde(default)]
    pub ftp_strategy: SubproblemStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ogd_eta0: Option<f64>,
    #[serde(default)]
    pub predictor: GpForecastConfig,
    #[serde(default)]
    pub traffic: TrafficParams,
}

mod defaults {
    use super::*;

    pub fn m() -> usize {
        3
    }
    pub fn unit_cost_range() -> [f64; 2] {
        [0.0, 2.0]
    }
    pub fn warmup() -> usize {
        50
    }
    pub fn online_steps() -> usize {
        100
    }
    pub fn trials() -> usize {
        10
    }
    pub fn algorithms() -> Vec<Algorithm> {
        Algorithm::ALL.to_vec()
    }
    pub fn benchmark_chunk() -> usize {
        5
    }
    pub fn s_max() -> usize {
        DEFAULT_S_MAX
    }
    pub fn long_term_window() -> usize {
        10
    }
    pub fn ftl_strategy() -> SubproblemStrategy {
        SubproblemStrategy::Local { restarts: 5 }
    }
}

impl ExperimentConfig {
    /// Ten topics on three servers, 50 warmup and 100 online steps, ten
    /// trials, all seven algorithms.
    pub fn full() -> Self {
        Self::with_topics(10)
    }

    pub fn with_topics(k: usize) -> Self {
        Self {
            seed: 0,
            k,
            m: defaults::m(),
            unit_costs: None,
            unit_cost_range: defaults::unit_cost_range(),
            warmup: defaults::warmup(),
            online_steps: defaults::online_steps(),
            trials: defaults::trials(),
            algorithms: defaults::algorithms(),
            benchmark_chunk: defaults::benchmark_chunk(),
            s_max: defaults::s_max(),
            long_term_window: defaults::long_term_window(),
            solver: PlanSolver::default(),
            benchmark_solver: None,
            ftl_strategy: defaults::ftl_strategy(),
            ftp_strategy: SubproblemStrategy::default(),
            ogd_eta0: None,
            predictor: GpForecastConfig::default(),
            traffic: TrafficParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return param_err("k and m must be at least 1");
        }
        if self.warmup < 2 {
            return param_err("warmup must be at least 2");
        }
        if self.online_steps == 0 || self.trials == 0 {
            return param_err("online_steps and trials must be at least 1");
        }
        if self.benchmark_chunk == 0 || self.s_max == 0 || self.long_term_window == 0 {
            return param_err("benchmark_chunk, s_max and long_term_window must be at least 1");
        }
        if self.algorithms.is_empty() {
            return param_err("at least one algorithm is required");
        }
        let [lo, hi] = self.unit_cost_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return param_err("unit_cost_range must satisfy 0 <= low <= high");
        }
        if let Some(u) = &self.unit_costs {
            ProblemShape::new(self.k, self.m, u.clone())?;
        }
        if let Some(eta) = self.ogd_eta0 {
            if !(eta >= 0.0 && eta.is_finite()) {
                return param_err("ogd_eta0 must be nonnegative");
            }
        }
        self.predictor.kernel.validate()?;
        self.traffic.validate()
    }

    pub fn horizon(&self) -> usize {
        self.warmup + self.online_steps
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, &[0x0074_7269_616c, trial as u64])
    }

    pub fn traffic_config(&self, trial: usize) -> TrafficGenConfig {
        TrafficGenConfig {
            seed: derive_seed(self.trial_seed(trial), &[1]),
            k: self.k,
            horizon: self.horizon(),
            params: self.traffic.clone(),
        }
    }

    pub fn benchmark_solver_for(&self, shape: &ProblemShape) -> PlanSolver {
        self.benchmark_solver.unwrap_or_else(|| PlanSolver::auto(shape))
    }
}

/// Shape, initial assignment and traffic for one trial.
#[derive(Clone, Debug)]
pub struct TrialSetup {
    pub trial: usize,
    pub seed: u64,
    pub shape: ProblemShape,
    pub x0: Assignment,
    pub series: TrafficSeries,
}

impl TrialSetup {
    pub fn build(config: &ExperimentConfig, trial: usize) -> Result<Self> {
        let seed = config.trial_seed(trial);
        let mut rng = stream(seed, &[2]);
        let [lo, hi] = config.unit_cost_range;
        let u = match &config.unit_costs {
            Some(u) => u.clone(),
            None => (0..config.m)
                .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
                .collect(),
        };
        let shape = ProblemShape::new(config.k, config.m, u)?;
        let x0 = Assignment::new((0..config.k).map(|_| rng.random_range(0..config.m)).collect(), config.m)?;
        let series = generate_traffic(&config.traffic_config(trial))?;
        Ok(Self {
            trial,
            seed,
            shape,
            x0,
            series,
        })
    }

    /// `θ` over the online segment.
    pub fn online(&self, warmup: usize) -> &[TrafficVector] {
        &self.series.steps()[warmup..]
    }
}

/// Optimal solutions of consecutive chunks of the horizon, each starting from
/// the previous chunk's final assignment.
pub fn offline_benchmark(
    objective: &dyn Objective,
    thetas: &[TrafficVector],
    x0: &Assignment,
    shape: &ProblemShape,
    chunk: usize,
    solver: PlanSolver,
    seed: u64,
) -> Result<PlanResult> {
    if chunk == 0 {
        return param_err("benchmark chunk must be at least 1");
    }
    let mut assignments = Vec::with_capacity(thetas.len());
    let mut solve_time = 0.0;
    let mut initial = x0.clone();
    for (idx, part) in thetas.chunks(chunk).enumerate() {
        let problem = PlanningProblem::new(shape.clone(), part.to_vec(), initial.clone())?;
        let result = solver.solve(objective, &problem, &mut stream(seed, &[idx as u64]))?;
        solve_time += result.solve_time;
        initial = result.assignments.last().expect("chunks are nonempty").clone();
        assignments.extend(result.assignments);
    }
    let total_cost = crate::solve::plan_cost_with(objective, &assignments, thetas, x0, shape)?;
    Ok(PlanResult {
        assignments,
        total_cost,
        solver_tag: format!("chunked-{}-{chunk}", solver.tag()),
        solve_time,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: usize,
    pub imbalance: f64,
    pub switching: f64,
    pub bench_imbalance: f64,
    pub bench_switching: f64,
    pub cum_regret: f64,
    pub cum_imb_regret: f64,
    pub cum_sw_regret: f64,
}

/// Per-step costs of an algorithm and of the benchmark, with cumulative
/// regret split into its imbalance and switching parts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub rows: Vec<LedgerRow>,
}

impl RegretLedger {
    pub fn from_costs(
        first_t: usize,
        alg: (&[f64], &[f64]),
        bench: (&[f64], &[f64]),
    ) -> Result<Self> {
        let n = alg.0.len();
        if alg.1.len() != n || bench.0.len() != n || bench.1.len() != n {
            return shape_err("ledger inputs must have equal lengths");
        }
        let mut rows = Vec::with_capacity(n);
        let (mut imb, mut sw) = (0.0, 0.0);
        for s in 0..n {
            imb += alg.0[s] - bench.0[s];
            sw += alg.1[s] - bench.1[s];
            rows.push(LedgerRow {
                t: first_t + s,
                imbalance: alg.0[s],
                switching: alg.1[s],
                bench_imbalance: bench.0[s],
                bench_switching: bench.1[s],
                cum_regret: imb + sw,
                cum_imb_regret: imb,
                cum_sw_regret: sw,
            });
        }
        Ok(Self { rows })
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn sequence_costs(
    objective: &dyn Objective,
    decisions: &[Assignment],
    thetas: &[TrafficVector],
    x0: &Assignment,
    shape: &ProblemShape,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut scratch = vec![0.0; shape.m()];
    let mut prev = x0;
    let mut imbalance = Vec::with_capacity(decisions.len());
    let mut switching = Vec::with_capacity(decisions.len());
    for (x, theta) in decisions.iter().zip(thetas) {
        shape.check_assignment(x)?;
        shape.check_traffic(theta)?;
        imbalance.push(objective.eval(x.rows(), theta.values(), &mut scratch));
        switching.push(switching_unchecked(prev.rows(), x.rows(), shape.unit_costs()));
        prev = x;
    }
    Ok((imbalance, switching))
}

/// Ledger of `alg` against `bench` over `thetas`, labelled from `first_t`.
pub fn cumulative_regret(
    objective: &dyn Objective,
    alg: &[Assignment],
    bench: &[Assignment],
    thetas: &[TrafficVector],
    first_t: usize,
    x0: &Assignment,
    shape: &ProblemShape,
) -> Result<RegretLedger> {
    if alg.len() != bench.len() || alg.len() != thetas.len() {
        return shape_err(format!(
            "ledger needs equal lengths (alg {}, benchmark {}, traffic {})",
            alg.len(),
            bench.len(),
            thetas.len()
        ));
    }
    let a = sequence_costs(objective, alg, thetas, x0, shape)?;
    let b = sequence_costs(objective, bench, thetas, x0, shape)?;
    RegretLedger::from_costs(first_t, (&a.0, &a.1), (&b.0, &b.1))
}

/// Knobs shared by every policy in a run.
pub struct PolicyContext<'a> {
    pub shape: &'a ProblemShape,
    pub objective: Arc<dyn Objective>,
    pub predictor: &'a (dyn Fn(u64) -> Box<dyn Predictor> + Sync),
    pub solver: PlanSolver,
    pub s_max: usize,
    pub long_term_window: usize,
    pub ftl_strategy: SubproblemStrategy,
    pub ftp_strategy: SubproblemStrategy,
    pub ogd_eta0: Option<f64>,
    pub seed: u64,
}

pub fn build_policy(algorithm: Algorithm, ctx: &PolicyContext<'_>) -> Result<Box<dyn OnlinePolicy>> {
    let seed = derive_seed(ctx.seed, &[algorithm.label()]);
    let planner = |rule| -> Result<Box<dyn OnlinePolicy>> {
        Ok(Box::new(PlanningPolicy::new(
            algorithm.to_string(),
            ctx.shape.clone(),
            ctx.objective.clone(),
            (ctx.predictor)(derive_seed(seed, &[1])),
            ctx.solver,
            rule,
            derive_seed(seed, &[2]),
        )?))
    };
    Ok(match algorithm {
        Algorithm::Static => Box::new(StaticPolicy),
        Algorithm::Ogd => Box::new(OgdPolicy::new(ctx.shape.clone(), ctx.objective.clone(), ctx.ogd_eta0)),
        Algorithm::Ftl => Box::new(FtlPolicy::new(ctx.shape.clone(), ctx.objective.clone(), ctx.ftl_strategy, seed)),
        Algorithm::Ftp => Box::new(FtpPolicy::new(ctx.shape.clone(), ctx.objective.clone(), ctx.ftp_strategy, seed)),
        Algorithm::ShortTerm => planner(WindowRule::Fixed { size: 1 })?,
        Algorithm::LongTerm => planner(WindowRule::Fixed {
            size: ctx.long_term_window,
        })?,
        Algorithm::Dynamic => planner(WindowRule::Dynamic { s_max: ctx.s_max })?,
        Algorithm::Fixed(size) => planner(WindowRule::Fixed { size })?,
    })
}

/// One algorithm on one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmOutcome {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub result: std::result::Result<AlgorithmRun, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmRun {
    pub ledger: RegretLedger,
    pub windows: Vec<Option<(usize, usize)>>,
    /// Mean wall-clock solve time per planning window, for planning
    /// algorithms.
    pub mean_window_solve_time: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub outcomes: Vec<AlgorithmOutcome>,
    /// Trials whose traffic or benchmark could not be built.
    pub setup_failures: Vec<(usize, String)>,
}

struct PreparedTrial {
    setup: TrialSetup,
    bench: PlanResult,
}

fn prepare_trial(config: &ExperimentConfig, trial: usize) -> Result<PreparedTrial> {
    let setup = TrialSetup::build(config, trial)?;
    let solver = config.benchmark_solver_for(&setup.shape);
    let bench = offline_benchmark(
        &Makespan,
        setup.online(config.warmup),
        &setup.x0,
        &setup.shape,
        config.benchmark_chunk,
        solver,
        derive_seed(setup.seed, &[3]),
    )?;
    Ok(PreparedTrial { setup, bench })
}

fn run_algorithm(
    config: &ExperimentConfig,
    prepared: &PreparedTrial,
    algorithm: Algorithm,
    solver: PlanSolver,
) -> Result<AlgorithmRun> {
    let setup = &prepared.setup;
    let predictor_config = config.predictor.clone();
    let predictor = move |_seed: u64| -> Box<dyn Predictor> { Box::new(GpPredictor::new(predictor_config.clone())) };
    let ctx = PolicyContext {
        shape: &setup.shape,
        objective: Arc::new(Makespan),
        predictor: &predictor,
        solver,
        s_max: config.s_max,
        long_term_window: config.long_term_window,
        ftl_strategy: config.ftl_strategy,
        ftp_strategy: config.ftp_strategy,
        ogd_eta0: config.ogd_eta0,
        seed: derive_seed(setup.seed, &[4]),
    };
    let mut policy = build_policy(algorithm, &ctx)?;
    let start = config.warmup + 1;
    let end = config.horizon();
    let started = std::time::Instant::now();
    let run: OnlineRun = run_online(policy.as_mut(), &setup.series, start, end, &setup.x0, &setup.shape, &Makespan)?;
    let elapsed = started.elapsed().as_secs_f64();
    let (bi, bs) = sequence_costs(
        &Makespan,
        &prepared.bench.assignments,
        setup.online(config.warmup),
        &setup.x0,
        &setup.shape,
    )?;
    let ledger = RegretLedger::from_costs(start, (&run.imbalance, &run.switching), (&bi, &bs))?;
    let restarts = run
        .windows
        .iter()
        .filter_map(|w| w.map(|(id, _)| id))
        .max();
    Ok(AlgorithmRun {
        ledger,
        windows: run.windows,
        mean_window_solve_time: restarts.map(|n| elapsed / n as f64),
    })
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Outcomes tagged with their solver, and trials that failed during setup.
type JobResults = (Vec<(PlanSolver, AlgorithmOutcome)>, Vec<(usize, String)>);

fn run_jobs(
    config: &ExperimentConfig,
    algorithms: &[Algorithm],
    solvers: &[PlanSolver],
    workers: usize,
) -> Result<JobResults> {
    config.validate()?;
    with_pool(workers, || {
        let prepared: Vec<(usize, Result<PreparedTrial>)> = (0..config.trials)
            .into_par_iter()
            .map(|trial| (trial, prepare_trial(config, trial)))
            .collect();
        let mut setup_failures = Vec::new();
        let mut jobs = Vec::new();
        for (trial, p) in &prepared {
            match p {
                Ok(p) => {
                    for &solver in solvers {
                        for &alg in algorithms {
                            jobs.push((*trial, p, solver, alg));
                        }
                    }
                }
                Err(e) => setup_failures.push((*trial, e.to_string())),
            }
        }
        let outcomes = jobs
            .into_par_iter()
            .map(|(trial, p, solver, algorithm)| {
                let result = run_algorithm(config, p, algorithm, solver).map_err(|e| e.to_string());
                (
                    solver,
                    AlgorithmOutcome {
                        trial,
                        algorithm,
                        result,
                    },
                )
            })
            .collect();
        (outcomes, setup_failures)
    })
}

/// Run every configured algorithm on every trial.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let (outcomes, setup_failures) = run_jobs(config, &config.algorithms, &[config.solver], workers)?;
    Ok(ExperimentResult {
        config: config.clone(),
        outcomes: outcomes.into_iter().map(|(_, o)| o).collect(),
        setup_failures,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

impl ExperimentResult {
    pub fn failures(&self) -> usize {
        self.setup_failures.len() + self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }

    fn runs_of(&self, algorithm: Algorithm) -> impl Iterator<Item = &AlgorithmRun> {
        self.outcomes
            .iter()
            .filter(move |o| o.algorithm == algorithm)
            .filter_map(|o| o.result.as_ref().ok())
    }

    /// Mean final cumulative regret per algorithm, in configuration order.
    pub fn mean_final_regret(&self) -> Vec<(Algorithm, f64)> {
        self.config
            .algorithms
            .iter()
            .map(|&a| {
                let finals: Vec<f64> = self.runs_of(a).map(|r| r.ledger.final_regret()).collect();
                (a, mean_std(&finals).0)
            })
            .collect()
    }

    /// Per-step mean and standard deviation of cumulative regret across
    /// trials, for plotting.
    pub fn regret_bands(&self, algorithm: Algorithm, part: RegretPart) -> Vec<(usize, f64, f64)> {
        let runs: Vec<&AlgorithmRun> = self.runs_of(algorithm).collect();
        let Some(first) = runs.first() else {
            return Vec::new();
        };
        (0..first.ledger.len())
            .map(|s| {
                let vals: Vec<f64> = runs.iter().map(|r| part.pick(&r.ledger.rows[s])).collect();
                let (m, sd) = mean_std(&vals);
                (first.ledger.rows[s].t, m, sd)
            })
            .collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for &alg in &self.config.algorithms {
            let runs: Vec<&AlgorithmRun> = self.runs_of(alg).collect();
            let n = runs.len();
            let mut push = |metric: &str, vals: Vec<f64>| {
                let (mean, std) = mean_std(&vals);
                rows.push(SummaryRow {
                    algorithm: alg.to_string(),
                    metric: metric.into(),
                    mean,
                    std,
                    trials: vals.len(),
                });
            };
            let last = |f: fn(&LedgerRow) -> f64| -> Vec<f64> {
                runs.iter()
                    .map(|r| r.ledger.rows.last().map_or(0.0, f))
                    .collect()
            };
            push("final_regret", last(|r| r.cum_regret));
            push("final_imbalance_regret", last(|r| r.cum_imb_regret));
            push("final_switching_regret", last(|r| r.cum_sw_regret));
            push(
                "total_cost",
                runs.iter()
                    .map(|r| r.ledger.rows.iter().map(|x| x.imbalance + x.switching).sum())
                    .collect(),
            );
            let windowed: Vec<&&AlgorithmRun> = runs.iter().filter(|r| r.windows.iter().any(Option::is_some)).collect();
            if !windowed.is_empty() {
                let counts: Vec<f64> = windowed
                    .iter()
                    .map(|r| r.windows.iter().filter_map(|w| w.map(|(id, _)| id)).max().unwrap_or(0) as f64)
                    .collect();
                let sizes: Vec<f64> = windowed
                    .iter()
                    .zip(&counts)
                    .map(|(r, c)| r.ledger.len() as f64 / c)
                    .collect();
                push("windows", counts);
                push("mean_window_size", sizes);
            }
            let failed = self.outcomes.iter().filter(|o| o.algorithm == alg && o.result.is_err()).count()
                + self.setup_failures.len();
            rows.push(SummaryRow {
                algorithm: alg.to_string(),
                metric: "failures".into(),
                mean: failed as f64,
                std: 0.0,
                trials: n + failed,
            });
        }
        rows.push(SummaryRow {
            algorithm: "benchmark".into(),
            metric: "chunk".into(),
            mean: self.config.benchmark_chunk as f64,
            std: 0.0,
            trials: self.config.trials,
        });
        rows
    }

    pub fn write_steps_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(STEP_HEADER)?;
        for o in &self.outcomes {
            let Ok(run) = &o.result else { continue };
            for (row, window) in run.ledger.rows.iter().zip(&run.windows) {
                let (id, size) = match window {
                    Some((id, size)) => (id.to_string(), size.to_string()),
                    None => (String::new(), String::new()),
                };
                w.write_record([
                    o.trial.to_string(),
                    o.algorithm.to_string(),
                    row.t.to_string(),
                    row.imbalance.to_string(),
                    row.switching.to_string(),
                    row.bench_imbalance.to_string(),
                    row.bench_switching.to_string(),
                    row.cum_regret.to_string(),
                    row.cum_imb_regret.to_string(),
                    row.cum_sw_regret.to_string(),
                    id,
                    size,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SUMMARY_HEADER)?;
        for row in self.summary() {
            w.write_record([
                row.algorithm,
                row.metric,
                row.mean.to_string(),
                row.std.to_string(),
                row.trials.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `(trial, algorithm, message)` for every failed run.
    pub fn failure_messages(&self) -> Vec<(usize, String, String)> {
        let mut out: Vec<(usize, String, String)> = self
            .setup_failures
            .iter()
            .map(|(t, e)| (*t, "setup".to_string(), e.clone()))
            .collect();
        out.extend(self.outcomes.iter().filter_map(|o| {
            o.result
                .as_ref()
                .err()
                .map(|e| (o.trial, o.algorithm.to_string(), e.clone()))
        }));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegretPart {
    Total,
    Imbalance,
    Switching,
}

impl RegretPart {
    fn pick(&self, row: &LedgerRow) -> f64 {
        match self {
            RegretPart::Total => row.cum_regret,
            RegretPart::Imbalance => row.cum_imb_regret,
            RegretPart::Switching => row.cum_sw_regret,
        }
    }
}

pub const STEP_HEADER: [&str; 12] = [
    "trial",
    "algorithm",
    "t",
    "imbalance",
    "switching",
    "bench_imbalance",
    "bench_switching",
    "cum_regret",
    "cum_imb_regret",
    "cum_sw_regret",
    "window_id",
    "window_size",
];

pub const SUMMARY_HEADER: [&str; 5] = ["algorithm", "metric", "mean", "std", "trials"];

pub const SWEEP_HEADER: [&str; 7] = [
    "solver",
    "window_size",
    "mean_regret",
    "std_regret",
    "mean_window_solve_time",
    "trials",
    "failures",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub solver: String,
    pub window_size: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_window_solve_time: f64,
    pub trials: usize,
    pub failures: usize,
}

/// Fixed-window planning for each size and solver, against the same
/// benchmark. Rows are ordered by solver, then size.
pub fn sweep_windows(
    config: &ExperimentConfig,
    sizes: &[usize],
    solvers: &[PlanSolver],
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if sizes.is_empty() || solvers.is_empty() {
        return param_err("sweep needs at least one window size and one solver");
    }
    let mut seen = std::collections::BTreeSet::new();
    for &s in sizes {
        if s == 0 {
            return param_err("window sizes must be at least 1");
        }
        if !seen.insert(s) {
            return param_err(format!("duplicate window size {s}"));
        }
    }
    let algorithms: Vec<Algorithm> = sizes.iter().map(|&s| Algorithm::Fixed(s)).collect();
    let (outcomes, setup_failures) = run_jobs(config, &algorithms, solvers, workers)?;
    let mut rows = Vec::new();
    for solver in solvers {
        for &size in sizes {
            let mine: Vec<&AlgorithmOutcome> = outcomes
                .iter()
                .filter(|(s, o)| s == solver && o.algorithm == Algorithm::Fixed(size))
                .map(|(_, o)| o)
                .collect();
            let ok: Vec<&AlgorithmRun> = mine.iter().filter_map(|o| o.result.as_ref().ok()).collect();
            let regrets: Vec<f64> = ok.iter().map(|r| r.ledger.final_regret()).collect();
            let times: Vec<f64> = ok.iter().filter_map(|r| r.mean_window_solve_time).collect();
            let (mean_regret, std_regret) = mean_std(&regrets);
            rows.push(SweepRow {
                solver: solver.tag(),
                window_size: size,
                mean_regret,
                std_regret,
                mean_window_solve_time: mean_std(&times).0,
                trials: ok.len(),
                failures: mine.len() - ok.len() + setup_failures.len(),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.solver.clone(),
            r.window_size.to_string(),
            r.mean_regret.to_string(),
            r.std_regret.to_string(),
            r.mean_window_solve_time.to_string(),
            r.trials.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

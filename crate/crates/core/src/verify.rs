//! Empirical checks of the regret guarantees, the fixed-point property and
//! the window-count rates. Each suite returns report rows; a suite passes
//! iff every row has zero violations.
//!
//! `max_slack` is the largest observed `measured − bound` (negative when
//! every instance is inside its bound). For ratio checks it is
//! `ratio − limit`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{FtlPolicy, FtpPolicy, OgdPolicy, StaticPolicy};
use crate::bounds::{
    loglog_slope, lower_bound_instance, simulate_window_recursion, total_regret_bound, window_regret_bound,
    UncertaintySchedule,
};
use crate::error::{param_err, Result};
use crate::model::{lipschitz_constant, max_switching_cost, Assignment, ProblemShape, TrafficSeries, TrafficVector};
use crate::objective::{Makespan, Objective};
use crate::online::{run_online, OnlinePolicy};
use crate::plan::{dynamic_planning_run, PlanningPolicy, PlanningSetup, WindowRule, DEFAULT_S_MAX};
use crate::predict::{oracle_forecast, ConstantPredictor, OraclePredictor};
use crate::rng::{derive_seed, stream};
use crate::solve::{exact_plan_dp, is_fixed_point, plan_cost, PlanSolver, PlanningProblem, SubproblemStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Thm1,
    Thm2,
    FixedPoint,
    Rates,
    LowerBound,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Thm1, Suite::Thm2, Suite::FixedPoint, Suite::Rates, Suite::LowerBound];

    pub fn names() -> String {
        Suite::ALL.map(|s| s.to_string()).join(", ")
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Thm1 => "thm1",
            Suite::Thm2 => "thm2",
            Suite::FixedPoint => "fixed-point",
            Suite::Rates => "rates",
            Suite::LowerBound => "lower-bound",
        })
    }
}

impl FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .map_or_else(|| param_err(format!("unknown suite `{s}` (valid: {})", Suite::names())), Ok)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub instances: usize,
    pub violations: usize,
    pub max_slack: f64,
    pub slope: Option<f64>,
    pub slope_target: Option<f64>,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides the suite's default instance count.
    pub instances: Option<usize>,
    /// Schedule exponents for `rates`; the default pair of regimes when absent.
    pub exponents: Option<(f64, f64)>,
}


pub fn run_suite(suite: Suite, options: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let n = |default: usize| options.instances.unwrap_or(default);
    match suite {
        Suite::Thm1 => Ok(vec![check_window_bound(n(50), options.seed)?]),
        Suite::Thm2 => Ok(vec![check_total_bound(n(20), options.seed)?]),
        Suite::FixedPoint => Ok(vec![check_fixed_point(n(30), options.seed)?]),
        Suite::Rates => match options.exponents {
            Some((a, b)) => Ok(vec![check_rate(a, b)?]),
            None => Ok(vec![check_rate(0.0, 0.5)?, check_rate(0.0, 1.0)?, check_rate_ordering()?]),
        },
        Suite::LowerBound => check_lower_bound(0.5, 1.0, 1000, n(50), options.seed),
    }
}

pub fn write_report<W: Write>(rows: &[CheckRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for r in rows {
        w.write_record([
            r.check.clone(),
            r.instances.to_string(),
            r.violations.to_string(),
            r.max_slack.to_string(),
            opt(r.slope),
            opt(r.slope_target),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const REPORT_HEADER: [&str; 6] = ["check", "instances", "violations", "max_slack", "slope", "slope_target"];

fn summarize(check: impl Into<String>, slacks: &[f64]) -> CheckRow {
    CheckRow {
        check: check.into(),
        instances: slacks.len(),
        violations: slacks.iter().filter(|s| **s > 0.0).count(),
        max_slack: slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        slope: None,
        slope_target: None,
    }
}

fn random_shape(rng: &mut impl Rng, k: usize, m: usize) -> Result<ProblemShape> {
    ProblemShape::new(k, m, (0..m).map(|_| rng.random_range(0.0..2.0)).collect())
}

fn random_assignment(rng: &mut impl Rng, k: usize, m: usize) -> Assignment {
    Assignment::new((0..k).map(|_| rng.random_range(0..m)).collect(), m).expect("rows are in range")
}

fn random_thetas(rng: &mut impl Rng, k: usize, len: usize) -> Result<Vec<TrafficVector>> {
    (0..len)
        .map(|_| TrafficVector::new((0..k).map(|_| rng.random_range(0.0..5.0)).collect()))
        .collect()
}

/// Window regret of a plan computed on oracle forecasts, against the plan
/// computed on the truth, from the same initial assignment.
/// Returns `regret − 2LΣε`.
pub fn window_bound_slack(seed: u64) -> Result<f64> {
    let (k, m, s) = (4, 2, 3);
    let mut rng = stream(seed, &[1]);
    let shape = random_shape(&mut rng, k, m)?;
    let x0 = random_assignment(&mut rng, k, m);
    let truth = TrafficSeries::new(k, random_thetas(&mut rng, k, s)?)?;
    let eps: Vec<f64> = (0..s).map(|_| rng.random_range(0.0..1.0)).collect();
    let forecast = oracle_forecast(&truth, 1, s, |i| eps[i - 1], &mut rng)?;
    let predicted = PlanningProblem::new(shape.clone(), forecast.means().to_vec(), x0.clone())?;
    let actual = PlanningProblem::new(shape.clone(), truth.steps().to_vec(), x0.clone())?;
    let plan = exact_plan_dp(&Makespan, &predicted, 1024)?;
    let best = exact_plan_dp(&Makespan, &actual, 1024)?;
    let regret = plan_cost(&plan.assignments, truth.steps(), &x0, &shape)? - best.total_cost;
    Ok(regret - window_regret_bound(lipschitz_constant(&shape), forecast.uncertainties()))
}

pub fn check_window_bound(instances: usize, seed: u64) -> Result<CheckRow> {
    let slacks = (0..instances)
        .into_par_iter()
        .map(|i| window_bound_slack(derive_seed(seed, &[0x7431, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("thm1-window-regret", &slacks))
}

/// Total regret of dynamic planning with oracle forecasts against the exact
/// full-horizon optimum. Returns `(regret, 2BI)`.
pub fn total_bound_run(seed: u64) -> Result<(f64, f64)> {
    let (k, m, horizon) = (4, 2, 40);
    let mut rng = stream(seed, &[1]);
    let shape = random_shape(&mut rng, k, m)?;
    let x0 = random_assignment(&mut rng, k, m);
    let series = TrafficSeries::new(k, random_thetas(&mut rng, k, horizon)?)?;
    let schedule = UncertaintySchedule::new(0.0, 0.7, 0.5)?;
    let setup = PlanningSetup {
        series: &series,
        predictor: Box::new(OraclePredictor::new(series.clone(), schedule, stream(seed, &[2]))),
        solver: PlanSolver::exact(),
        shape: &shape,
        objective: Arc::new(Makespan),
        x0: &x0,
        t_start: 1,
        t_end: horizon,
        seed: derive_seed(seed, &[3]),
    };
    let (run, trace) = dynamic_planning_run(setup, DEFAULT_S_MAX)?;
    let problem = PlanningProblem::new(shape.clone(), series.steps().to_vec(), x0)?;
    let best = exact_plan_dp(&Makespan, &problem, 1024)?;
    Ok((
        run.total_cost() - best.total_cost,
        total_regret_bound(max_switching_cost(&shape), trace.count()),
    ))
}

pub fn check_total_bound(instances: usize, seed: u64) -> Result<CheckRow> {
    let slacks = (0..instances)
        .into_par_iter()
        .map(|i| total_bound_run(derive_seed(seed, &[0x7432, i as u64])).map(|(r, b)| r - b))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("thm2-total-regret", &slacks))
}

/// `1.0` when the DP plan of a random instance is not a fixed point.
pub fn fixed_point_violation(seed: u64) -> Result<f64> {
    let mut rng = stream(seed, &[1]);
    let k = rng.random_range(1..=5);
    let s = rng.random_range(1..=4);
    let shape = random_shape(&mut rng, k, 2)?;
    let x0 = random_assignment(&mut rng, k, 2);
    let problem = PlanningProblem::new(shape, random_thetas(&mut rng, k, s)?, x0)?;
    let plan = exact_plan_dp(&Makespan, &problem, 1024)?;
    Ok(match is_fixed_point(&Makespan, &problem, &plan.assignments, 1024)? {
        Some(_) => 1.0,
        None => -1.0,
    })
}

pub fn check_fixed_point(instances: usize, seed: u64) -> Result<CheckRow> {
    let slacks = (0..instances)
        .into_par_iter()
        .map(|i| fixed_point_violation(derive_seed(seed, &[0x6670, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("fixed-point-dp", &slacks))
}

pub const RATE_HORIZONS: [usize; 3] = [1_000, 10_000, 100_000];
pub const LOG_REGIME_RATIO: f64 = 3.0;
pub const SLOPE_TOLERANCE: f64 = 0.15;

/// Window counts `I(T)` of the recursion with `L = B = scale = 1`.
pub fn window_counts(a: f64, b: f64, horizons: &[usize]) -> Result<Vec<usize>> {
    let schedule = UncertaintySchedule::new(a, b, 1.0)?;
    horizons
        .iter()
        .map(|&t| simulate_window_recursion(&schedule, 1.0, 1.0, t).map(|r| r.count()))
        .collect()
}

/// Polynomial regime (`b < a+1`): the log-log slope of `I` against `T` lies
/// within `0.15` of `1 − b/(a+1)`. Otherwise `I(10⁵)/I(10³) < 3`.
pub fn check_rate(a: f64, b: f64) -> Result<CheckRow> {
    let counts = window_counts(a, b, &RATE_HORIZONS)?;
    let points: Vec<(f64, f64)> = RATE_HORIZONS
        .iter()
        .zip(&counts)
        .map(|(&t, &i)| (t as f64, i as f64))
        .collect();
    let slope = loglog_slope(&points);
    let (target, slack) = if b < a + 1.0 {
        let target = 1.0 - b / (a + 1.0);
        (target, (slope - target).abs() - SLOPE_TOLERANCE)
    } else {
        let ratio = counts[2] as f64 / counts[0] as f64;
        (0.0, ratio - LOG_REGIME_RATIO)
    };
    Ok(CheckRow {
        check: format!("rates-a{a}-b{b}"),
        instances: RATE_HORIZONS.len(),
        violations: usize::from(slack >= 0.0),
        max_slack: slack,
        slope: Some(slope),
        slope_target: Some(target),
    })
}

/// For each `a`, the growth `I(10⁵)/I(10³)` strictly decreases from the
/// polynomial to the logarithmic to the double-logarithmic regime.
pub fn check_rate_ordering() -> Result<CheckRow> {
    let mut slacks = Vec::new();
    for a in [0.0, 1.0] {
        let growth = [0.5, 1.0, 2.0]
            .into_iter()
            .map(|f| {
                let c = window_counts(a, f * (a + 1.0), &[RATE_HORIZONS[0], RATE_HORIZONS[2]])?;
                Ok(c[1] as f64 / c[0] as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        slacks.extend(growth.windows(2).map(|w| w[1] - w[0]));
    }
    Ok(summarize("rates-regime-ordering", &slacks))
}

/// Every online algorithm the crate implements, by name.
pub const LOWER_BOUND_ALGORITHMS: [&str; 7] = ["static", "ogd", "ftl", "ftp", "short-term", "long-term", "dynamic"];

/// Regret of `algorithm` on one draw of the adversarial instance.
pub fn lower_bound_regret(algorithm: &str, b: f64, l: f64, horizon: usize, seed: u64) -> Result<f64> {
    let instance = lower_bound_instance(b, l, horizon, &mut stream(seed, &[1]))?;
    let shape = instance.shape.clone();
    let objective: Arc<dyn Objective> = Arc::new(instance.objective());
    let planner = |rule| -> Result<Box<dyn OnlinePolicy>> {
        Ok(Box::new(PlanningPolicy::new(
            algorithm,
            shape.clone(),
            objective.clone(),
            Box::new(ConstantPredictor::new(instance.prediction(), instance.schedule())),
            PlanSolver::exact(),
            rule,
            derive_seed(seed, &[2]),
        )?))
    };
    let mut policy: Box<dyn OnlinePolicy> = match algorithm {
        "static" => Box::new(StaticPolicy),
        "ogd" => Box::new(OgdPolicy::new(shape.clone(), objective.clone(), None)),
        "ftl" => Box::new(FtlPolicy::new(
            shape.clone(),
            objective.clone(),
            SubproblemStrategy::default(),
            derive_seed(seed, &[3]),
        )),
        "ftp" => Box::new(FtpPolicy::new(
            shape.clone(),
            objective.clone(),
            SubproblemStrategy::default(),
            derive_seed(seed, &[3]),
        )),
        "short-term" => planner(WindowRule::Fixed { size: 1 })?,
        "long-term" => planner(WindowRule::Fixed { size: 10 })?,
        "dynamic" => planner(WindowRule::Dynamic { s_max: DEFAULT_S_MAX })?,
        other => return param_err(format!("unknown algorithm `{other}`")),
    };
    let x0 = Assignment::constant(1, 0);
    let run = run_online(policy.as_mut(), &instance.series, 1, horizon, &x0, &shape, objective.as_ref())?;
    Ok(run.total_cost() - instance.clairvoyant_total())
}

pub const LOWER_BOUND_BAND: (f64, f64) = (0.7, 1.3);

/// Mean regret of every algorithm over `instances` draws must fall within
/// `[0.7, 1.3]·L·Σ t^{-b}`. `max_slack` is the distance outside the band,
/// relative to the target.
pub fn check_lower_bound(b: f64, l: f64, horizon: usize, instances: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let target = l * (1..=horizon).map(|t| (t as f64).powf(-b)).sum::<f64>();
    LOWER_BOUND_ALGORITHMS
        .iter()
        .map(|alg| {
            let regrets = (0..instances)
                .into_par_iter()
                .map(|i| lower_bound_regret(alg, b, l, horizon, derive_seed(seed, &[0x6c62, i as u64])))
                .collect::<Result<Vec<_>>>()?;
            let ratio = regrets.iter().sum::<f64>() / instances as f64 / target;
            let slack = (LOWER_BOUND_BAND.0 - ratio).max(ratio - LOWER_BOUND_BAND.1);
            Ok(CheckRow {
                check: format!("lower-bound-{alg}"),
                instances,
                violations: usize::from(slack > 0.0),
                max_slack: slack,
                slope: None,
                slope_target: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        let err = "thm3".parse::<Suite>().unwrap_err().to_string();
        assert!(err.contains("thm1") && err.contains("lower-bound"));
    }

    #[test]
    fn small_window_bound_sample_holds() {
        let row = check_window_bound(10, 5).unwrap();
        assert_eq!(row.violations, 0, "{row:?}");
        assert!(row.max_slack < 0.0);
    }

    #[test]
    fn fixed_point_sample_holds() {
        assert_eq!(check_fixed_point(10, 1).unwrap().violations, 0);
    }

    #[test]
    fn square_root_regime_slope() {
        let row = check_rate(0.0, 0.5).unwrap();
        assert!(row.passed(), "{row:?}");
        assert!((row.slope.unwrap() - 0.5).abs() < 0.15);
    }

    #[test]
    fn regimes_rank_in_order() {
        assert!(check_rate_ordering().unwrap().passed());
    }

    #[test]
    fn report_has_header_and_blank_optional_cells() {
        let rows = vec![summarize("x", &[-1.0, -0.5])];
        let mut buf = Vec::new();
        write_report(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "check,instances,violations,max_slack,slope,slope_target\nx,2,0,-0.5,,\n");
    }

    #[test]
    fn lower_bound_regret_is_about_the_sum() {
        let rows = check_lower_bound(0.5, 1.0, 200, 20, 3).unwrap();
        assert_eq!(rows.len(), 7);
        for row in rows {
            assert!(row.passed(), "{row:?}");
        }
    }
}

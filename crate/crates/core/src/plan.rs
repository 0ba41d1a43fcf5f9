//! Dynamic planning windows: at each restart, forecast ahead, pick the
//! largest window whose accumulated uncertainty `2LΣε` stays within the
//! switching-cost bound `B`, plan it on the predicted traffic, and execute.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::model::{max_switching_cost, Assignment, ProblemShape, TrafficSeries};
use crate::objective::Objective;
use crate::online::{run_online, Decision, OnlinePolicy, OnlineRun, StreamView};
use crate::predict::{Forecast, Predictor};
use crate::rng::{from_seed, SimRng};
use crate::solve::{PlanResult, PlanSolver, PlanningProblem};

pub const DEFAULT_S_MAX: usize = 20;

/// Largest `S ≤ cap` with `2L·Σ_{j<S} ε_j ≤ B`, or 1 if even `S = 1` fails.
pub(crate) fn largest_window(eps: impl IntoIterator<Item = f64>, l: f64, b: f64, cap: usize) -> usize {
    let mut total = 0.0;
    let mut size = 0;
    for e in eps.into_iter().take(cap) {
        total += e;
        if 2.0 * l * total > b {
            break;
        }
        size += 1;
    }
    size.max(1)
}

pub fn select_window(uncertainties: &[f64], l: f64, b: f64, s_max: usize) -> Result<usize> {
    if uncertainties.is_empty() {
        return param_err("window selection needs at least one uncertainty");
    }
    if !(l > 0.0) || !(b >= 0.0) || s_max == 0 {
        return param_err(format!("window selection needs L > 0, B >= 0, s_max >= 1 (got {l}, {b}, {s_max})"));
    }
    if uncertainties.iter().any(|e| !(*e >= 0.0)) {
        return param_err("uncertainties must be nonnegative");
    }
    Ok(largest_window(uncertainties.iter().copied(), l, b, s_max))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowRecord {
    /// First step of the window, `T_i`.
    pub start: usize,
    /// `S_i`.
    pub size: usize,
    pub forecast: Forecast,
    pub plan: PlanResult,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WindowTrace {
    pub restarts: Vec<WindowRecord>,
}

impl WindowTrace {
    /// Number of planning windows `I`.
    pub fn count(&self) -> usize {
        self.restarts.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.restarts.iter().map(|r| r.size).collect()
    }

    /// Whether the windows cover `start..=end` exactly, back to back.
    pub fn tiles(&self, start: usize, end: usize) -> bool {
        let mut next = start;
        for r in &self.restarts {
            if r.start != next || r.size == 0 {
                return false;
            }
            next += r.size;
        }
        next == end + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WindowRule {
    Dynamic { s_max: usize },
    Fixed { size: usize },
}

/// Plans a window at each restart and replays it step by step.
pub struct PlanningPolicy {
    name: String,
    shape: ProblemShape,
    objective: Arc<dyn Objective>,
    predictor: Box<dyn Predictor>,
    solver: PlanSolver,
    rule: WindowRule,
    lipschitz: f64,
    switch_bound: f64,
    rng: SimRng,
    queue: VecDeque<Assignment>,
    trace: WindowTrace,
}

impl PlanningPolicy {
    pub fn new(
        name: impl Into<String>,
        shape: ProblemShape,
        objective: Arc<dyn Objective>,
        predictor: Box<dyn Predictor>,
        solver: PlanSolver,
        rule: WindowRule,
        seed: u64,
    ) -> Result<Self> {
        match rule {
            WindowRule::Dynamic { s_max: 0 } | WindowRule::Fixed { size: 0 } => {
                return param_err("planning window bounds must be at least 1")
            }
            _ => {}
        }
        Ok(Self {
            name: name.into(),
            lipschitz: objective.lipschitz(&shape),
            switch_bound: max_switching_cost(&shape),
            shape,
            objective,
            predictor,
            solver,
            rule,
            rng: from_seed(seed),
            queue: VecDeque::new(),
            trace: WindowTrace::default(),
        })
    }

    /// Override the `L` and `B` used by the window rule.
    pub fn with_constants(mut self, lipschitz: f64, switch_bound: f64) -> Self {
        self.lipschitz = lipschitz;
        self.switch_bound = switch_bound;
        self
    }

    pub fn trace(&self) -> &WindowTrace {
        &self.trace
    }

    pub fn into_trace(self) -> WindowTrace {
        self.trace
    }

    fn replan(&mut self, view: &StreamView<'_>, prev: &Assignment) -> Result<()> {
        let horizon = match self.rule {
            WindowRule::Dynamic { s_max } => s_max.min(view.remaining()),
            WindowRule::Fixed { size } => size.min(view.remaining()),
        };
        let forecast = self.predictor.forecast(view, horizon)?;
        let size = match self.rule {
            WindowRule::Dynamic { .. } => select_window(
                forecast.uncertainties(),
                self.lipschitz,
                self.switch_bound,
                horizon,
            )?,
            WindowRule::Fixed { .. } => horizon,
        };
        let forecast = forecast.truncated(size);
        let problem = PlanningProblem::new(self.shape.clone(), forecast.means().to_vec(), prev.clone())?;
        let plan = self.solver.solve(self.objective.as_ref(), &problem, &mut self.rng)?;
        self.queue.extend(plan.assignments.iter().cloned());
        self.trace.restarts.push(WindowRecord {
            start: view.t(),
            size,
            forecast,
            plan,
        });
        Ok(())
    }
}

impl OnlinePolicy for PlanningPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, view: &StreamView<'_>, prev: &Assignment) -> Result<Decision> {
        if self.queue.is_empty() {
            self.replan(view, prev)?;
        }
        let id = self.trace.count();
        let size = self.trace.restarts.last().map_or(0, |r| r.size);
        let assignment = self.queue.pop_front().expect("replan fills the queue");
        Ok(Decision {
            assignment,
            window: Some((id, size)),
        })
    }
}

/// Everything a planning run needs besides the window rule.
pub struct PlanningSetup<'a> {
    pub series: &'a TrafficSeries,
    pub predictor: Box<dyn Predictor>,
    pub solver: PlanSolver,
    pub shape: &'a ProblemShape,
    pub objective: Arc<dyn Objective>,
    pub x0: &'a Assignment,
    pub t_start: usize,
    pub t_end: usize,
    pub seed: u64,
}

fn planning_run(setup: PlanningSetup<'_>, rule: WindowRule) -> Result<(OnlineRun, WindowTrace)> {
    let mut policy = PlanningPolicy::new(
        "planning",
        setup.shape.clone(),
        setup.objective.clone(),
        setup.predictor,
        setup.solver,
        rule,
        setup.seed,
    )?;
    let run = run_online(
        &mut policy,
        setup.series,
        setup.t_start,
        setup.t_end,
        setup.x0,
        setup.shape,
        setup.objective.as_ref(),
    )?;
    Ok((run, policy.into_trace()))
}

/// Receding-horizon planning with windows chosen from the forecast uncertainties.
pub fn dynamic_planning_run(setup: PlanningSetup<'_>, s_max: usize) -> Result<(OnlineRun, WindowTrace)> {
    planning_run(setup, WindowRule::Dynamic { s_max })
}

/// The same loop with every window of size `size` (clipped at the end).
pub fn fixed_window_run(setup: PlanningSetup<'_>, size: usize) -> Result<(OnlineRun, WindowTrace)> {
    planning_run(setup, WindowRule::Fixed { size })
}

//! Offline planners for the finite-horizon problem
//! `min Σ_t f(x_t, θ_t) + d(x_t, x_{t-1})` with `x_0` fixed.
//!
//! Every solver breaks ties by the smallest base-`m` encoding of the
//! assignment, so results are reproducible bit for bit.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, shape_err, Error, Result};
use crate::model::{switching_unchecked, Assignment, ProblemShape, TrafficVector};
use crate::objective::Objective;
use crate::rng::SimRng;

pub const DEFAULT_ENUMERATION_LIMIT: u64 = 60_000;
pub const DEFAULT_DP_STATE_LIMIT: u64 = 1024;
pub const DEFAULT_PASSES: usize = 10;
pub const DEFAULT_RELAX_C: f64 = 0.5;
pub const DEFAULT_RESTARTS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem", into = "RawProblem")]
pub struct PlanningProblem {
    shape: ProblemShape,
    thetas: Vec<TrafficVector>,
    initial: Assignment,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    k: usize,
    m: usize,
    u: Vec<f64>,
    thetas: Vec<TrafficVector>,
    initial: Assignment,
}

impl TryFrom<RawProblem> for PlanningProblem {
    type Error = Error;

    fn try_from(raw: RawProblem) -> Result<Self> {
        PlanningProblem::new(ProblemShape::new(raw.k, raw.m, raw.u)?, raw.thetas, raw.initial)
    }
}

impl From<PlanningProblem> for RawProblem {
    fn from(p: PlanningProblem) -> Self {
        RawProblem {
            k: p.shape.k(),
            m: p.shape.m(),
            u: p.shape.unit_costs().to_vec(),
            thetas: p.thetas,
            initial: p.initial,
        }
    }
}

impl PlanningProblem {
    pub fn new(shape: ProblemShape, thetas: Vec<TrafficVector>, initial: Assignment) -> Result<Self> {
        if thetas.is_empty() {
            return param_err("planning problem needs at least one step");
        }
        shape.check_assignment(&initial)?;
        for theta in &thetas {
            shape.check_traffic(theta)?;
        }
        Ok(Self {
            shape,
            thetas,
            initial,
        })
    }

    pub fn shape(&self) -> &ProblemShape {
        &self.shape
    }

    pub fn thetas(&self) -> &[TrafficVector] {
        &self.thetas
    }

    pub fn initial(&self) -> &Assignment {
        &self.initial
    }

    pub fn horizon(&self) -> usize {
        self.thetas.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub assignments: Vec<Assignment>,
    pub total_cost: f64,
    pub solver_tag: String,
    /// Wall-clock seconds.
    pub solve_time: f64,
}

/// `Σ_t f(x_t, θ_t) + d(x_{t-1}, x_t)` with `x_0 = initial`.
pub fn plan_cost_with(
    objective: &dyn Objective,
    assignments: &[Assignment],
    thetas: &[TrafficVector],
    initial: &Assignment,
    shape: &ProblemShape,
) -> Result<f64> {
    if assignments.len() != thetas.len() {
        return shape_err(format!(
            "{} assignments for {} traffic vectors",
            assignments.len(),
            thetas.len()
        ));
    }
    shape.check_assignment(initial)?;
    let mut scratch = vec![0.0; shape.m()];
    let mut total = 0.0;
    let mut prev = initial;
    for (x, theta) in assignments.iter().zip(thetas) {
        shape.check_assignment(x)?;
        shape.check_traffic(theta)?;
        total += objective.eval(x.rows(), theta.values(), &mut scratch);
        total += switching_unchecked(prev.rows(), x.rows(), shape.unit_costs());
        prev = x;
    }
    Ok(total)
}

/// [`plan_cost_with`] under the makespan objective.
pub fn plan_cost(
    assignments: &[Assignment],
    thetas: &[TrafficVector],
    initial: &Assignment,
    shape: &ProblemShape,
) -> Result<f64> {
    plan_cost_with(&crate::objective::Makespan, assignments, thetas, initial, shape)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SubproblemStrategy {
    /// Exhaustive over all `m^k` assignments.
    Enumerate {
        #[serde(default = "default_enumeration_limit")]
        limit: u64,
    },
    /// Best-improvement single-topic moves from `left`, plus random restarts.
    Local {
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
}

fn default_enumeration_limit() -> u64 {
    DEFAULT_ENUMERATION_LIMIT
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

fn default_state_limit() -> u64 {
    DEFAULT_DP_STATE_LIMIT
}

fn default_passes() -> usize {
    DEFAULT_PASSES
}

fn default_relax_c() -> f64 {
    DEFAULT_RELAX_C
}

impl Default for SubproblemStrategy {
    fn default() -> Self {
        SubproblemStrategy::Enumerate {
            limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }
}

impl SubproblemStrategy {
    pub fn tag(&self) -> &'static str {
        match self {
            SubproblemStrategy::Enumerate { .. } => "enumerate",
            SubproblemStrategy::Local { .. } => "local",
        }
    }
}

/// `Σ_j w_j f(x, θ_j) + c·d(x, left) + c·d(x, right)` with the switching part
/// tabulated per topic and server.
struct Subproblem<'a> {
    objective: &'a dyn Objective,
    terms: &'a [(f64, &'a TrafficVector)],
    penalty: Vec<f64>,
    k: usize,
    m: usize,
}

impl<'a> Subproblem<'a> {
    fn new(
        objective: &'a dyn Objective,
        shape: &ProblemShape,
        terms: &'a [(f64, &'a TrafficVector)],
        left: &Assignment,
        right: Option<&Assignment>,
        c: f64,
    ) -> Result<Self> {
        if terms.is_empty() {
            return param_err("subproblem needs at least one traffic term");
        }
        if !(c.is_finite() && c >= 0.0) {
            return param_err(format!("relaxation weight c must be nonnegative (got {c})"));
        }
        shape.check_assignment(left)?;
        if let Some(r) = right {
            shape.check_assignment(r)?;
        }
        for (w, theta) in terms {
            if !(w.is_finite() && *w >= 0.0) {
                return param_err("subproblem term weights must be nonnegative");
            }
            shape.check_traffic(theta)?;
        }
        let (k, m) = (shape.k(), shape.m());
        let u = shape.unit_costs();
        let hop = |a: usize, b: usize| if a == b { 0.0 } else { u[a] + u[b] };
        let mut penalty = vec![0.0; k * m];
        for i in 0..k {
            for j in 0..m {
                let mut p = hop(left.rows[i], j);
                if let Some(r) = right {
                    p += hop(r.rows[i], j);
                }
                penalty[i * m + j] = c * p;
            }
        }
        Ok(Self {
            objective,
            terms,
            penalty,
            k,
            m,
        })
    }

    fn value(&self, rows: &[usize], scratch: &mut [f64]) -> f64 {
        let mut v = 0.0;
        for (w, theta) in self.terms {
            if *w != 0.0 {
                v += w * self.objective.eval(rows, theta.values(), scratch);
            }
        }
        for (i, &j) in rows.iter().enumerate() {
            v += self.penalty[i * self.m + j];
        }
        v
    }

    /// Exhaustive minimum, visiting assignments in increasing encoding so a
    /// strict comparison keeps the smallest encoding among ties.
    fn enumerate(&self, limit: u64) -> Result<(Vec<usize>, f64)> {
        let count = (self.m as u64).checked_pow(self.k as u32);
        match count {
            Some(n) if n <= limit => {}
            _ => {
                return Err(Error::Capacity(format!(
                    "enumeration over {}^{} assignments exceeds the limit {limit}",
                    self.m, self.k
                )))
            }
        }
        let mut scratch = vec![0.0; self.m];
        let mut rows = vec![0usize; self.k];
        let mut best_rows = rows.clone();
        let mut best = f64::INFINITY;
        loop {
            let v = self.value(&rows, &mut scratch);
            if v < best {
                best = v;
                best_rows.copy_from_slice(&rows);
            }
            let mut i = self.k;
            loop {
                if i == 0 {
                    return Ok((best_rows, best));
                }
                i -= 1;
                rows[i] += 1;
                if rows[i] < self.m {
                    break;
                }
                rows[i] = 0;
            }
        }
    }

    fn descend(&self, mut rows: Vec<usize>, scratch: &mut [f64]) -> (Vec<usize>, f64) {
        let mut current = self.value(&rows, scratch);
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.k {
                let home = rows[i];
                for j in 0..self.m {
                    if j == home {
                        continue;
                    }
                    rows[i] = j;
                    let v = self.value(&rows, scratch);
                    rows[i] = home;
                    // candidates are scanned in a fixed order; keep the first
                    // minimum, then prefer the smaller resulting encoding
                    let better = match best {
                        None => v < current,
                        Some((bv, bi, bj)) => {
                            v < bv || (v == bv && encoding_less(&rows, (i, j), (bi, bj)))
                        }
                    };
                    if better {
                        best = Some((v, i, j));
                    }
                }
            }
            match best {
                Some((v, i, j)) => {
                    rows[i] = j;
                    current = v;
                }
                None => return (rows, current),
            }
        }
    }

    fn local(&self, left: &Assignment, restarts: usize, rng: &mut SimRng) -> (Vec<usize>, f64) {
        let mut scratch = vec![0.0; self.m];
        let mut best = self.descend(left.rows.clone(), &mut scratch);
        for _ in 0..restarts {
            let start: Vec<usize> = (0..self.k).map(|_| rng.random_range(0..self.m)).collect();
            let cand = self.descend(start, &mut scratch);
            if cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                best = cand;
            }
        }
        best
    }
}

/// Whether moving topic `a.0` to `a.1` yields a lexicographically smaller
/// assignment than moving `b.0` to `b.1`, both applied to `rows`.
fn encoding_less(rows: &[usize], a: (usize, usize), b: (usize, usize)) -> bool {
    let at = |mv: (usize, usize), i: usize| if i == mv.0 { mv.1 } else { rows[i] };
    let first = a.0.min(b.0);
    let last = a.0.max(b.0);
    for i in first..=last {
        let (x, y) = (at(a, i), at(b, i));
        if x != y {
            return x < y;
        }
    }
    false
}

/// Minimize `Σ_j w_j f(x, θ_j) + c·d(x, left) + c·d(x, right)`.
///
/// Returns the minimizer and its objective value.
#[allow(clippy::too_many_arguments)]
pub fn solve_subproblem(
    objective: &dyn Objective,
    shape: &ProblemShape,
    terms: &[(f64, &TrafficVector)],
    left: &Assignment,
    right: Option<&Assignment>,
    c: f64,
    strategy: SubproblemStrategy,
    rng: &mut SimRng,
) -> Result<(Assignment, f64)> {
    let sub = Subproblem::new(objective, shape, terms, left, right, c)?;
    let (rows, value) = match strategy {
        SubproblemStrategy::Enumerate { limit } => sub.enumerate(limit)?,
        SubproblemStrategy::Local { restarts } => sub.local(left, restarts, rng),
    };
    Ok((Assignment { rows }, value))
}

/// Value of the single-step subproblem at a given assignment.
pub fn subproblem_value(
    objective: &dyn Objective,
    shape: &ProblemShape,
    terms: &[(f64, &TrafficVector)],
    left: &Assignment,
    right: Option<&Assignment>,
    c: f64,
    x: &Assignment,
) -> Result<f64> {
    let sub = Subproblem::new(objective, shape, terms, left, right, c)?;
    shape.check_assignment(x)?;
    Ok(sub.value(x.rows(), &mut vec![0.0; shape.m()]))
}

/// Iterative temporal decoupling.
///
/// Starts from `x_t = x_0` everywhere and sweeps `t = 1..S` for `passes`
/// passes, re-solving each step with its neighbours fixed. Passes before the
/// last use weight `relax_c` on the switching terms, the last uses 1. An
/// update is kept only if it does not worsen the current subproblem.
pub fn iterative_plan(
    objective: &dyn Objective,
    problem: &PlanningProblem,
    passes: usize,
    relax_c: f64,
    strategy: SubproblemStrategy,
    rng: &mut SimRng,
) -> Result<PlanResult> {
    iterative_plan_observed(objective, problem, passes, relax_c, strategy, rng, |_, _, _| {})
}

/// [`iterative_plan`] that calls `observer(pass, t, plan)` after every
/// accepted update (`pass` and `t` count from 1).
pub fn iterative_plan_observed(
    objective: &dyn Objective,
    problem: &PlanningProblem,
    passes: usize,
    relax_c: f64,
    strategy: SubproblemStrategy,
    rng: &mut SimRng,
    mut observer: impl FnMut(usize, usize, &[Assignment]),
) -> Result<PlanResult> {
    if passes == 0 {
        return param_err("iterative solver needs at least one pass");
    }
    if !(relax_c.is_finite() && relax_c >= 0.0) {
        return param_err("relaxation weight must be nonnegative");
    }
    let started = Instant::now();
    let shape = problem.shape();
    let horizon = problem.horizon();
    let mut plan = vec![problem.initial().clone(); horizon];
    let mut scratch = vec![0.0; shape.m()];
    for pass in 1..=passes {
        let c = if pass < passes { relax_c } else { 1.0 };
        for t in 0..horizon {
            let terms = [(1.0, &problem.thetas()[t])];
            let left = if t == 0 { problem.initial() } else { &plan[t - 1] };
            let right = plan.get(t + 1);
            let sub = Subproblem::new(objective, shape, &terms, left, right, c)?;
            let (rows, value) = match strategy {
                SubproblemStrategy::Enumerate { limit } => sub.enumerate(limit)?,
                SubproblemStrategy::Local { restarts } => sub.local(left, restarts, rng),
            };
            if rows == plan[t].rows {
                continue;
            }
            if value <= sub.value(plan[t].rows(), &mut scratch) {
                plan[t] = Assignment { rows };
                observer(pass, t + 1, &plan);
            }
        }
    }
    let total_cost = plan_cost_with(objective, &plan, problem.thetas(), problem.initial(), shape)?;
    Ok(PlanResult {
        assignments: plan,
        total_cost,
        solver_tag: format!("iterative-{}", strategy.tag()),
        solve_time: started.elapsed().as_secs_f64(),
    })
}

/// Globally optimal plan by dynamic programming over assignments.
pub fn exact_plan_dp(
    objective: &dyn Objective,
    problem: &PlanningProblem,
    state_limit: u64,
) -> Result<PlanResult> {
    let started = Instant::now();
    let shape = problem.shape();
    let (k, m) = (shape.k(), shape.m());
    let n = match shape.assignment_count() {
        Some(n) if n <= state_limit => n as usize,
        _ => {
            return Err(Error::Capacity(format!(
                "dynamic program over {m}^{k} states exceeds the limit {state_limit}"
            )))
        }
    };
    let u = shape.unit_costs();
    let mut hop = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            if a != b {
                hop[a * m + b] = u[a] + u[b];
            }
        }
    }
    let states: Vec<usize> = (0..n as u64)
        .flat_map(|code| Assignment::decode(code, k, m).rows)
        .collect();
    let row = |x: usize| &states[x * k..(x + 1) * k];
    let dist = |a: usize, b: usize| -> f64 {
        row(a)
            .iter()
            .zip(row(b))
            .map(|(&p, &q)| hop[p * m + q])
            .sum()
    };

    let mut scratch = vec![0.0; m];
    let x0 = problem.initial().encode(m) as usize;
    let thetas = problem.thetas();
    let mut value: Vec<f64> = (0..n)
        .map(|x| objective.eval(row(x), thetas[0].values(), &mut scratch) + dist(x0, x))
        .collect();
    let mut back: Vec<Vec<u32>> = Vec::with_capacity(thetas.len().saturating_sub(1));
    let mut next = vec![0.0; n];
    for theta in &thetas[1..] {
        let mut pointers = vec![0u32; n];
        for (x, slot) in next.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (prev, &v) in value.iter().enumerate() {
                let cand = v + dist(prev, x);
                if cand < best {
                    best = cand;
                    arg = prev;
                }
            }
            pointers[x] = arg as u32;
            *slot = objective.eval(row(x), theta.values(), &mut scratch) + best;
        }
        std::mem::swap(&mut value, &mut next);
        back.push(pointers);
    }

    let mut last = 0;
    for (x, &v) in value.iter().enumerate() {
        if v < value[last] {
            last = x;
        }
    }
    let mut path = vec![last];
    for pointers in back.iter().rev() {
        let prev = pointers[*path.last().expect("path is nonempty")] as usize;
        path.push(prev);
    }
    path.reverse();
    let assignments: Vec<Assignment> = path
        .into_iter()
        .map(|x| Assignment {
            rows: row(x).to_vec(),
        })
        .collect();
    let total_cost = plan_cost_with(objective, &assignments, thetas, problem.initial(), shape)?;
    Ok(PlanResult {
        assignments,
        total_cost,
        solver_tag: "exact-dp".into(),
        solve_time: started.elapsed().as_secs_f64(),
    })
}

/// Relative slack below which an improvement is treated as rounding noise.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-9;

/// First step `t` (1-based) at which some assignment strictly improves the
/// `c = 1` subproblem with both neighbours fixed, with that assignment.
/// `None` means `assignments` is a fixed point.
pub fn is_fixed_point(
    objective: &dyn Objective,
    problem: &PlanningProblem,
    assignments: &[Assignment],
    limit: u64,
) -> Result<Option<(usize, Assignment)>> {
    if assignments.len() != problem.horizon() {
        return shape_err(format!(
            "{} assignments for a horizon of {}",
            assignments.len(),
            problem.horizon()
        ));
    }
    let shape = problem.shape();
    let mut scratch = vec![0.0; shape.m()];
    for t in 0..assignments.len() {
        let terms = [(1.0, &problem.thetas()[t])];
        let left = if t == 0 {
            problem.initial()
        } else {
            &assignments[t - 1]
        };
        let sub = Subproblem::new(objective, shape, &terms, left, assignments.get(t + 1), 1.0)?;
        shape.check_assignment(&assignments[t])?;
        let current = sub.value(assignments[t].rows(), &mut scratch);
        let (rows, best) = sub.enumerate(limit)?;
        if best < current - FIXED_POINT_TOLERANCE * (1.0 + current.abs()) {
            return Ok(Some((t + 1, Assignment { rows })));
        }
    }
    Ok(None)
}

/// Window solver used by the planning policies and the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlanSolver {
    Exact {
        #[serde(default = "default_state_limit")]
        state_limit: u64,
    },
    Iterative {
        #[serde(default = "default_passes")]
        passes: usize,
        #[serde(default = "default_relax_c")]
        relax_c: f64,
        #[serde(default)]
        strategy: SubproblemStrategy,
    },
}

impl Default for PlanSolver {
    fn default() -> Self {
        PlanSolver::Iterative {
            passes: DEFAULT_PASSES,
            relax_c: DEFAULT_RELAX_C,
            strategy: SubproblemStrategy::default(),
        }
    }
}

impl PlanSolver {
    pub fn exact() -> Self {
        PlanSolver::Exact {
            state_limit: DEFAULT_DP_STATE_LIMIT,
        }
    }

    /// Exact DP when the state space fits the default limit, otherwise the
    /// iterative solver with enumeration.
    pub fn auto(shape: &ProblemShape) -> Self {
        match shape.assignment_count() {
            Some(n) if n <= DEFAULT_DP_STATE_LIMIT => Self::exact(),
            _ => Self::default(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            PlanSolver::Exact { .. } => "exact-dp".into(),
            PlanSolver::Iterative { strategy, .. } => format!("iterative-{}", strategy.tag()),
        }
    }

    pub fn solve(
        &self,
        objective: &dyn Objective,
        problem: &PlanningProblem,
        rng: &mut SimRng,
    ) -> Result<PlanResult> {
        match *self {
            PlanSolver::Exact { state_limit } => exact_plan_dp(objective, problem, state_limit),
            PlanSolver::Iterative {
                passes,
                relax_c,
                strategy,
            } => iterative_plan(objective, problem, passes, relax_c, strategy, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Makespan;
    use crate::rng::from_seed;

    fn tv(v: &[f64]) -> TrafficVector {
        TrafficVector::new(v.to_vec()).unwrap()
    }

    fn asg(rows: &[usize]) -> Assignment {
        Assignment { rows: rows.to_vec() }
    }

    fn random_problem(seed: u64, k: usize, m: usize, horizon: usize) -> PlanningProblem {
        let mut rng = from_seed(seed);
        let u = (0..m).map(|_| rng.random_range(0.0..2.0)).collect();
        let shape = ProblemShape::new(k, m, u).unwrap();
        let thetas = (0..horizon)
            .map(|_| tv(&(0..k).map(|_| rng.random_range(0.0..5.0)).collect::<Vec<_>>()))
            .collect();
        let initial = Assignment {
            rows: (0..k).map(|_| rng.random_range(0..m)).collect(),
        };
        PlanningProblem::new(shape, thetas, initial).unwrap()
    }

    #[test]
    fn plan_cost_examples() {
        let shape = ProblemShape::uniform(2, 2, 1.0).unwrap();
        let cost = plan_cost(&[asg(&[0, 1])], &[tv(&[2.0, 2.0])], &asg(&[0, 0]), &shape).unwrap();
        assert_eq!(cost, 4.0);
        let cost = plan_cost(&[asg(&[0, 0])], &[tv(&[2.0, 2.0])], &asg(&[0, 0]), &shape).unwrap();
        assert_eq!(cost, 4.0);
        assert!(plan_cost(&[], &[tv(&[1.0, 1.0])], &asg(&[0, 0]), &shape).is_err());
    }

    #[test]
    fn subproblem_split_beats_switch_penalty() {
        let shape = ProblemShape::uniform(2, 2, 1.0).unwrap();
        let theta = tv(&[10.0, 10.0]);
        let (x, v) = solve_subproblem(
            &Makespan,
            &shape,
            &[(1.0, &theta)],
            &asg(&[0, 0]),
            None,
            0.5,
            SubproblemStrategy::default(),
            &mut from_seed(0),
        )
        .unwrap();
        assert_eq!(x.rows(), &[0, 1]);
        assert_eq!(v, 11.0);
    }

    #[test]
    fn huge_c_keeps_left() {
        let p = random_problem(3, 4, 3, 1);
        let left = p.initial().clone();
        let (x, _) = solve_subproblem(
            &Makespan,
            p.shape(),
            &[(1.0, &p.thetas()[0])],
            &left,
            None,
            1e9,
            SubproblemStrategy::default(),
            &mut from_seed(0),
        )
        .unwrap();
        assert_eq!(x, left);
    }

    #[test]
    fn enumeration_limit_is_enforced() {
        let shape = ProblemShape::uniform(11, 3, 1.0).unwrap();
        let theta = TrafficVector::zeros(11);
        let err = solve_subproblem(
            &Makespan,
            &shape,
            &[(1.0, &theta)],
            &Assignment::constant(11, 0),
            None,
            1.0,
            SubproblemStrategy::default(),
            &mut from_seed(0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }

    #[test]
    fn ties_break_to_smallest_encoding() {
        let shape = ProblemShape::uniform(3, 2, 0.0).unwrap();
        let theta = TrafficVector::zeros(3);
        let (x, _) = solve_subproblem(
            &Makespan,
            &shape,
            &[(1.0, &theta)],
            &asg(&[1, 1, 1]),
            None,
            1.0,
            SubproblemStrategy::default(),
            &mut from_seed(0),
        )
        .unwrap();
        assert_eq!(x.rows(), &[0, 0, 0]);
    }

    #[test]
    fn local_never_beats_enumeration() {
        let mut equal = 0;
        for seed in 0..100 {
            let k = 1 + (seed as usize % 5);
            let p = random_problem(seed, k, 2, 1);
            let terms = [(1.0, &p.thetas()[0])];
            let solve = |strategy| {
                solve_subproblem(&Makespan, p.shape(), &terms, p.initial(), None, 1.0, strategy, &mut from_seed(seed))
                    .unwrap()
                    .1
            };
            let exact = solve(SubproblemStrategy::default());
            let local = solve(SubproblemStrategy::Local { restarts: 5 });
            assert!(local >= exact - 1e-12);
            if local == exact {
                equal += 1;
            }
        }
        assert!(equal >= 80, "local matched enumeration on {equal}/100");
    }

    #[test]
    fn zero_traffic_stays_put() {
        let mut p = random_problem(9, 3, 2, 4);
        p.thetas = vec![TrafficVector::zeros(3); 4];
        let shape = ProblemShape::uniform(3, 2, 1.0).unwrap();
        let p = PlanningProblem::new(shape, p.thetas, p.initial).unwrap();
        for result in [
            exact_plan_dp(&Makespan, &p, 1024).unwrap(),
            iterative_plan(&Makespan, &p, 10, 0.5, SubproblemStrategy::default(), &mut from_seed(1)).unwrap(),
        ] {
            assert!(result.assignments.iter().all(|x| x == p.initial()));
            assert_eq!(result.total_cost, 0.0);
        }
    }

    #[test]
    fn single_step_solvers_agree() {
        for seed in 0..30 {
            let p = random_problem(seed, 4, 2, 1);
            let dp = exact_plan_dp(&Makespan, &p, 1024).unwrap();
            let it = iterative_plan(&Makespan, &p, 1, 0.5, SubproblemStrategy::default(), &mut from_seed(0)).unwrap();
            let (x, v) = solve_subproblem(
                &Makespan,
                p.shape(),
                &[(1.0, &p.thetas()[0])],
                p.initial(),
                None,
                1.0,
                SubproblemStrategy::default(),
                &mut from_seed(0),
            )
            .unwrap();
            assert_eq!(dp.assignments[0], x);
            assert_eq!(it.assignments[0], x);
            assert!((dp.total_cost - v).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_matches_brute_force() {
        for seed in 0..20 {
            let p = random_problem(seed, 3, 2, 3);
            let dp = exact_plan_dp(&Makespan, &p, 1024).unwrap();
            let mut best = f64::INFINITY;
            for code in 0..512u64 {
                let seq: Vec<Assignment> = (0..3)
                    .map(|t| Assignment::decode((code >> (3 * t)) & 7, 3, 2))
                    .collect();
                best = best.min(plan_cost(&seq, p.thetas(), p.initial(), p.shape()).unwrap());
            }
            assert_eq!(dp.total_cost, best);
        }
    }

    #[test]
    fn iterative_is_never_better_than_dp() {
        for seed in 0..40 {
            let p = random_problem(seed, 1 + seed as usize % 5, 2, 1 + seed as usize % 4);
            let dp = exact_plan_dp(&Makespan, &p, 1024).unwrap();
            let it = iterative_plan(&Makespan, &p, 10, 0.5, SubproblemStrategy::default(), &mut from_seed(seed)).unwrap();
            assert!(it.total_cost >= dp.total_cost - 1e-9);
        }
    }

    #[test]
    fn final_pass_never_increases_plan_cost() {
        for seed in 0..20 {
            let p = random_problem(seed, 4, 3, 5);
            let mut last: Option<f64> = None;
            iterative_plan_observed(
                &Makespan,
                &p,
                4,
                0.5,
                SubproblemStrategy::default(),
                &mut from_seed(seed),
                |pass, _, plan| {
                    let cost = plan_cost(plan, p.thetas(), p.initial(), p.shape()).unwrap();
                    if pass == 4 {
                        if let Some(prev) = last {
                            assert!(cost <= prev + 1e-9);
                        }
                    }
                    last = Some(cost);
                },
            )
            .unwrap();
        }
    }

    #[test]
    fn dp_output_is_a_fixed_point() {
        for seed in 0..30 {
            let p = random_problem(seed, 1 + seed as usize % 5, 2, 1 + seed as usize % 4);
            let dp = exact_plan_dp(&Makespan, &p, 1024).unwrap();
            assert_eq!(is_fixed_point(&Makespan, &p, &dp.assignments, 1 << 20).unwrap(), None);
        }
    }

    #[test]
    fn improvable_sequence_is_not_a_fixed_point() {
        let shape = ProblemShape::uniform(2, 2, 0.1).unwrap();
        let p = PlanningProblem::new(shape, vec![tv(&[5.0, 5.0]); 2], asg(&[0, 1])).unwrap();
        let plan = vec![asg(&[0, 1]), asg(&[0, 0])];
        let (t, x) = is_fixed_point(&Makespan, &p, &plan, 1024).unwrap().unwrap();
        assert_eq!(t, 2);
        assert_eq!(x.rows(), &[0, 1]);
    }

    #[test]
    fn problem_json_round_trip() {
        let p = random_problem(4, 3, 2, 2);
        let text = p.to_json().unwrap();
        assert!(text.contains("\"thetas\""));
        assert_eq!(PlanningProblem::from_json(&text).unwrap(), p);
        assert!(PlanningProblem::from_json(r#"{"k":2,"m":2,"u":[1,1],"thetas":[],"initial":[0,0]}"#).is_err());
    }

    #[test]
    fn solver_is_deterministic() {
        let p = random_problem(77, 5, 3, 4);
        let solver = PlanSolver::Iterative {
            passes: 3,
            relax_c: 0.5,
            strategy: SubproblemStrategy::Local { restarts: 5 },
        };
        let a = solver.solve(&Makespan, &p, &mut from_seed(5)).unwrap();
        let b = solver.solve(&Makespan, &p, &mut from_seed(5)).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.total_cost, b.total_cost);
    }

    #[test]
    fn solver_config_parses() {
        let s: PlanSolver = serde_json::from_str(r#"{"kind":"exact"}"#).unwrap();
        assert_eq!(s, PlanSolver::exact());
        let s: PlanSolver =
            serde_json::from_str(r#"{"kind":"iterative","strategy":{"kind":"local"}}"#).unwrap();
        assert_eq!(s.tag(), "iterative-local");
    }
}

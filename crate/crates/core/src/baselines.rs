//! Non-predictive baselines: static, online gradient descent on a
//! row-stochastic relaxation, follow-the-leader and follow-the-previous.

use std::sync::Arc;

use crate::error::{param_err, Result};
use crate::model::{Assignment, ProblemShape, TrafficVector};
use crate::objective::Objective;
use crate::online::{Decision, OnlinePolicy, StreamView};
use crate::rng::{from_seed, SimRng};
use crate::solve::{solve_subproblem, SubproblemStrategy};

/// Row-stochastic `k×m` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedAssignment {
    k: usize,
    m: usize,
    data: Vec<f64>,
}

impl RelaxedAssignment {
    pub fn new(k: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * m {
            return param_err(format!("relaxed assignment needs {} entries, got {}", k * m, data.len()));
        }
        let x = Self { k, m, data };
        if !x.is_row_stochastic(1e-9) {
            return param_err("relaxed assignment rows must lie on the probability simplex");
        }
        Ok(x)
    }

    pub fn one_hot(x: &Assignment, m: usize) -> Self {
        let k = x.len();
        let mut data = vec![0.0; k * m];
        for (i, &j) in x.rows().iter().enumerate() {
            data[i * m + j] = 1.0;
        }
        Self { k, m, data }
    }

    pub fn uniform(k: usize, m: usize) -> Self {
        Self {
            k,
            m,
            data: vec![1.0 / m as f64; k * m],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        (0..self.k).all(|i| {
            let row = self.row(i);
            row.iter().all(|&p| p >= -tol && p <= 1.0 + tol) && (row.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }

    /// Per-row argmax, lowest server index on ties.
    pub fn decode(&self) -> Assignment {
        let rows = (0..self.k)
            .map(|i| {
                let row = self.row(i);
                (0..self.m).fold(0, |best, j| if row[j] > row[best] { j } else { best })
            })
            .collect();
        Assignment { rows }
    }

    /// `X ← Π(X − η·G)` with each row projected onto the simplex.
    pub fn step(&mut self, grad: &[f64], eta: f64) {
        for i in 0..self.k {
            let shifted: Vec<f64> = (0..self.m)
                .map(|j| self.data[i * self.m + j] - eta * grad[i * self.m + j])
                .collect();
            let projected = project_row_simplex(&shifted);
            self.data[i * self.m..(i + 1) * self.m].copy_from_slice(&projected);
        }
    }
}

/// Subgradient of `max_j Σ_i X_ij θ_i`: `θ` in the column of the busiest
/// server (lowest index on ties), zero elsewhere. Row-major `k×m`.
pub fn makespan_subgradient(x: &RelaxedAssignment, theta: &TrafficVector) -> Vec<f64> {
    crate::objective::Makespan.relaxed_subgradient(x, theta.values())
}

/// Euclidean projection onto `{p ≥ 0, Σp = 1}`.
pub fn project_row_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (idx, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let candidate = (cumulative - 1.0) / (idx + 1) as f64;
        if s - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Never moves.
#[derive(Clone, Debug)]
pub struct StaticPolicy;

impl OnlinePolicy for StaticPolicy {
    fn name(&self) -> &str {
        "static"
    }

    fn decide(&mut self, _view: &StreamView<'_>, prev: &Assignment) -> Result<Decision> {
        Ok(prev.clone().into())
    }
}

/// Projected subgradient descent on the relaxation, executing the argmax.
///
/// The step size is `η_0/√t`; when `η_0` is not given it is set to
/// `0.1·m/mean(θ)` over the history seen at the first update.
#[derive(Debug)]
pub struct OgdPolicy {
    shape: ProblemShape,
    objective: Arc<dyn Objective>,
    eta0: Option<f64>,
    iterate: Option<RelaxedAssignment>,
}

impl OgdPolicy {
    pub fn new(shape: ProblemShape, objective: Arc<dyn Objective>, eta0: Option<f64>) -> Self {
        Self {
            shape,
            objective,
            eta0,
            iterate: None,
        }
    }

    pub fn iterate(&self) -> Option<&RelaxedAssignment> {
        self.iterate.as_ref()
    }
}

impl OnlinePolicy for OgdPolicy {
    fn name(&self) -> &str {
        "ogd"
    }

    fn decide(&mut self, view: &StreamView<'_>, prev: &Assignment) -> Result<Decision> {
        let m = self.shape.m();
        let iterate = self.iterate.get_or_insert_with(|| RelaxedAssignment::one_hot(prev, m));
        let Some(theta) = view.last() else {
            return Ok(prev.clone().into());
        };
        let eta0 = *self.eta0.get_or_insert_with(|| {
            let history = view.history();
            let count = (history.len() * view.k()) as f64;
            let mean = history.iter().map(TrafficVector::sum).sum::<f64>() / count;
            if mean > 0.0 {
                0.1 * m as f64 / mean
            } else {
                0.0
            }
        });
        if eta0 > 0.0 {
            let grad = self.objective.relaxed_subgradient(iterate, theta.values());
            iterate.step(&grad, eta0 / (view.t() as f64).sqrt());
        }
        Ok(iterate.decode().into())
    }
}

/// Minimizes the summed past cost plus the switching cost from `x_{t-1}`.
#[derive(Debug)]
pub struct FtlPolicy {
    shape: ProblemShape,
    objective: Arc<dyn Objective>,
    strategy: SubproblemStrategy,
    rng: SimRng,
}

impl FtlPolicy {
    pub fn new(shape: ProblemShape, objective: Arc<dyn Objective>, strategy: SubproblemStrategy, seed: u64) -> Self {
        Self {
            shape,
            objective,
            strategy,
            rng: from_seed(seed),
        }
    }
}

impl OnlinePolicy for FtlPolicy {
    fn name(&self) -> &str {
        "ftl"
    }

    fn decide(&mut self, view: &StreamView<'_>, prev: &Assignment) -> Result<Decision> {
        let history = view.history();
        if history.is_empty() {
            return Ok(prev.clone().into());
        }
        let terms: Vec<(f64, &TrafficVector)> = history.iter().map(|v| (1.0, v)).collect();
        let (x, _) = solve_subproblem(
            self.objective.as_ref(),
            &self.shape,
            &terms,
            prev,
            None,
            1.0,
            self.strategy,
            &mut self.rng,
        )?;
        Ok(x.into())
    }
}

/// Minimizes the last observed cost plus the switching cost from `x_{t-1}`.
#[derive(Debug)]
pub struct FtpPolicy {
    shape: ProblemShape,
    objective: Arc<dyn Objective>,
    strategy: SubproblemStrategy,
    rng: SimRng,
}

impl FtpPolicy {
    pub fn new(shape: ProblemShape, objective: Arc<dyn Objective>, strategy: SubproblemStrategy, seed: u64) -> Self {
        Self {
            shape,
            objective,
            strategy,
            rng: from_seed(seed),
        }
    }
}

impl OnlinePolicy for FtpPolicy {
    fn name(&self) -> &str {
        "ftp"
    }

    fn decide(&mut self, view: &StreamView<'_>, prev: &Assignment) -> Result<Decision> {
        let Some(theta) = view.last() else {
            return Ok(prev.clone().into());
        };
        let (x, _) = solve_subproblem(
            self.objective.as_ref(),
            &self.shape,
            &[(1.0, theta)],
            prev,
            None,
            1.0,
            self.strategy,
            &mut self.rng,
        )?;
        Ok(x.into())
    }
}

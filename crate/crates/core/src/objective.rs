//! Per-step cost functions `f(x, θ)` the solvers and policies are generic over.
//!
//! [`Makespan`] is the load-balancing objective used everywhere in the
//! experiment; the lower-bound construction in [`crate::bounds`] supplies a
//! second implementation.

use std::fmt;

use crate::baselines::RelaxedAssignment;
use crate::model::{makespan_unchecked, Assignment, ProblemShape, TrafficVector};

pub trait Objective: Send + Sync + fmt::Debug {
    /// Cost of a discrete assignment. `scratch` has length `m`; dimensions
    /// are validated by the caller.
    fn eval(&self, rows: &[usize], theta: &[f64], scratch: &mut [f64]) -> f64;

    /// Lipschitz constant in `θ` under the Euclidean norm.
    fn lipschitz(&self, shape: &ProblemShape) -> f64;

    /// Cost of the row-stochastic relaxation.
    fn relaxed_eval(&self, x: &RelaxedAssignment, theta: &[f64]) -> f64;

    /// A subgradient of [`Objective::relaxed_eval`] in `x`, row-major `k×m`.
    fn relaxed_subgradient(&self, x: &RelaxedAssignment, theta: &[f64]) -> Vec<f64>;

    fn cost(&self, x: &Assignment, theta: &TrafficVector, shape: &ProblemShape) -> f64 {
        let mut scratch = vec![0.0; shape.m()];
        self.eval(x.rows(), theta.values(), &mut scratch)
    }
}

/// `f(x, θ) = max_j Σ_{i: x_i = j} θ_i`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Makespan;

impl Makespan {
    fn relaxed_loads(x: &RelaxedAssignment, theta: &[f64]) -> Vec<f64> {
        let m = x.m();
        let mut loads = vec![0.0; m];
        for (i, &v) in theta.iter().enumerate() {
            for (j, load) in loads.iter_mut().enumerate() {
                *load += x.get(i, j) * v;
            }
        }
        loads
    }
}

impl Objective for Makespan {
    fn eval(&self, rows: &[usize], theta: &[f64], scratch: &mut [f64]) -> f64 {
        makespan_unchecked(rows, theta, scratch)
    }

    fn lipschitz(&self, shape: &ProblemShape) -> f64 {
        crate::model::lipschitz_constant(shape)
    }

    fn relaxed_eval(&self, x: &RelaxedAssignment, theta: &[f64]) -> f64 {
        Self::relaxed_loads(x, theta).into_iter().fold(0.0, f64::max)
    }

    fn relaxed_subgradient(&self, x: &RelaxedAssignment, theta: &[f64]) -> Vec<f64> {
        let (k, m) = (x.k(), x.m());
        let loads = Self::relaxed_loads(x, theta);
        // lowest index wins ties
        let busiest = loads
            .iter()
            .enumerate()
            .fold(0, |best, (j, &l)| if l > loads[best] { j } else { best });
        let mut grad = vec![0.0; k * m];
        for (i, &v) in theta.iter().enumerate() {
            grad[i * m + busiest] = v;
        }
        grad
    }
}

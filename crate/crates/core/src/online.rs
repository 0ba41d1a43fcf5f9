//! The revealed-information interface shared by every online algorithm.
//!
//! At step `t` a policy sees `θ_1..θ_{t-1}` through a [`StreamView`] and
//! commits `x_t`; only then does the harness reveal `θ_t`.

use crate::error::{param_err, Error, Result};
use crate::model::{switching_unchecked, Assignment, ProblemShape, TrafficSeries, TrafficVector};
use crate::objective::Objective;

/// Read-only window onto a series at decision time `t` (1-based).
#[derive(Clone, Copy, Debug)]
pub struct StreamView<'a> {
    series: &'a TrafficSeries,
    t: usize,
    end: usize,
}

impl<'a> StreamView<'a> {
    /// View at time `t` of a run that ends at `end` (inclusive).
    pub fn new(series: &'a TrafficSeries, t: usize, end: usize) -> Result<Self> {
        if t == 0 || t > end || end > series.len() {
            return param_err(format!(
                "stream view t={t}, end={end} invalid for a series of length {}",
                series.len()
            ));
        }
        Ok(Self { series, t, end })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn k(&self) -> usize {
        self.series.k()
    }

    /// `θ_1..θ_{t-1}`.
    pub fn history(&self) -> &'a [TrafficVector] {
        &self.series.steps()[..self.t - 1]
    }

    /// `θ_s`, available only for `s < t`.
    pub fn get(&self, s: usize) -> Result<&'a TrafficVector> {
        if s >= self.t || s == 0 {
            return Err(Error::Lookahead {
                requested: s,
                current: self.t,
            });
        }
        Ok(&self.series.steps()[s - 1])
    }

    /// The most recent revealed vector, if any.
    pub fn last(&self) -> Option<&'a TrafficVector> {
        self.history().last()
    }

    /// Steps left in the run including `t`.
    pub fn remaining(&self) -> usize {
        self.end + 1 - self.t
    }
}

/// One committed decision, optionally tagged with the planning window it
/// came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub assignment: Assignment,
    /// `(window id, window size)`.
    pub window: Option<(usize, usize)>,
}

impl From<Assignment> for Decision {
    fn from(assignment: Assignment) -> Self {
        Self {
            assignment,
            window: None,
        }
    }
}

pub trait OnlinePolicy: Send {
    fn name(&self) -> &str;

    /// Commit `x_t` given the view at `t` and `x_{t-1}`.
    fn decide(&mut self, view: &StreamView<'_>, prev: &Assignment) -> Result<Decision>;
}

/// Per-step outcome of an online run over `start..=end`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OnlineRun {
    pub decisions: Vec<Assignment>,
    pub imbalance: Vec<f64>,
    pub switching: Vec<f64>,
    pub windows: Vec<Option<(usize, usize)>>,
}

impl OnlineRun {
    pub fn total_cost(&self) -> f64 {
        self.imbalance.iter().sum::<f64>() + self.switching.iter().sum::<f64>()
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }
}

/// Drive `policy` over steps `start..=end` of `series`, starting from `x0`.
pub fn run_online(
    policy: &mut dyn OnlinePolicy,
    series: &TrafficSeries,
    start: usize,
    end: usize,
    x0: &Assignment,
    shape: &ProblemShape,
    objective: &dyn Objective,
) -> Result<OnlineRun> {
    shape.check_assignment(x0)?;
    if series.k() != shape.k() {
        return param_err(format!("series has k={}, shape has k={}", series.k(), shape.k()));
    }
    let mut run = OnlineRun::default();
    let mut prev = x0.clone();
    let mut scratch = vec![0.0; shape.m()];
    for t in start..=end {
        let view = StreamView::new(series, t, end)?;
        let decision = policy.decide(&view, &prev)?;
        shape.check_assignment(&decision.assignment)?;
        let theta = &series.steps()[t - 1];
        run.imbalance
            .push(objective.eval(decision.assignment.rows(), theta.values(), &mut scratch));
        run.switching.push(switching_unchecked(
            prev.rows(),
            decision.assignment.rows(),
            shape.unit_costs(),
        ));
        run.windows.push(decision.window);
        prev = decision.assignment.clone();
        run.decisions.push(decision.assignment);
    }
    Ok(run)
}

/// Imbalance and switching cost of a fixed decision sequence over
/// `θ_start..θ_{start+len-1}`.
pub fn replay_costs(
    decisions: &[Assignment],
    series: &TrafficSeries,
    start: usize,
    x0: &Assignment,
    shape: &ProblemShape,
    objective: &dyn Objective,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if start == 0 || start + decisions.len() - 1 > series.len() {
        return param_err("replay window exceeds the series");
    }
    let mut scratch = vec![0.0; shape.m()];
    let mut imbalance = Vec::with_capacity(decisions.len());
    let mut switching = Vec::with_capacity(decisions.len());
    let mut prev = x0;
    for (offset, x) in decisions.iter().enumerate() {
        shape.check_assignment(x)?;
        let theta = &series.steps()[start + offset - 1];
        imbalance.push(objective.eval(x.rows(), theta.values(), &mut scratch));
        switching.push(switching_unchecked(prev.rows(), x.rows(), shape.unit_costs()));
        prev = x;
    }
    Ok((imbalance, switching))
}

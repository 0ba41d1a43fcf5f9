//! Domain types and the two cost primitives every other module composes:
//! the makespan (server imbalance) and the switching cost between
//! consecutive assignments.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, shape_err, Error, Result};

/// Topic count `k`, server count `m`, and the per-server unit switching cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawShape", into = "RawShape")]
pub struct ProblemShape {
    k: usize,
    m: usize,
    unit_costs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawShape {
    k: usize,
    m: usize,
    u: Vec<f64>,
}

impl TryFrom<RawShape> for ProblemShape {
    type Error = Error;

    fn try_from(raw: RawShape) -> Result<Self> {
        ProblemShape::new(raw.k, raw.m, raw.u)
    }
}

impl From<ProblemShape> for RawShape {
    fn from(shape: ProblemShape) -> Self {
        RawShape {
            k: shape.k,
            m: shape.m,
            u: shape.unit_costs,
        }
    }
}

impl ProblemShape {
    pub fn new(k: usize, m: usize, unit_costs: Vec<f64>) -> Result<Self> {
        if k == 0 || m == 0 {
            return param_err(format!("k and m must be positive (got k={k}, m={m})"));
        }
        if unit_costs.len() != m {
            return shape_err(format!(
                "unit_costs has {} entries, expected m={m}",
                unit_costs.len()
            ));
        }
        if unit_costs.iter().any(|u| !u.is_finite() || *u < 0.0) {
            return param_err("unit switching costs must be finite and nonnegative");
        }
        Ok(Self { k, m, unit_costs })
    }

    /// Shape with the same unit cost on every server.
    pub fn uniform(k: usize, m: usize, unit_cost: f64) -> Result<Self> {
        Self::new(k, m, vec![unit_cost; m])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn unit_costs(&self) -> &[f64] {
        &self.unit_costs
    }

    /// `m^k`, or `None` on overflow.
    pub fn assignment_count(&self) -> Option<u64> {
        (self.m as u64).checked_pow(u32::try_from(self.k).ok()?)
    }

    pub(crate) fn check_assignment(&self, x: &Assignment) -> Result<()> {
        if x.len() != self.k {
            return shape_err(format!("assignment has {} rows, expected k={}", x.len(), self.k));
        }
        if let Some(bad) = x.rows.iter().find(|&&j| j >= self.m) {
            return shape_err(format!("server index {bad} out of range for m={}", self.m));
        }
        Ok(())
    }

    pub(crate) fn check_traffic(&self, theta: &TrafficVector) -> Result<()> {
        if theta.len() != self.k {
            return shape_err(format!(
                "traffic vector has {} entries, expected k={}",
                theta.len(),
                self.k
            ));
        }
        Ok(())
    }
}

/// Topic-to-server assignment: entry `i` is the server hosting topic `i`.
///
/// This is the dense one-hot matrix `x ∈ {0,1}^{k×m}` stored by column index,
/// so every row sums to one by construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    pub(crate) rows: Vec<usize>,
}

impl Assignment {
    pub fn new(rows: Vec<usize>, m: usize) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|&&j| j >= m) {
            return shape_err(format!("server index {bad} out of range for m={m}"));
        }
        Ok(Self { rows })
    }

    /// Every topic on `server`.
    pub fn constant(k: usize, server: usize) -> Self {
        Self {
            rows: vec![server; k],
        }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Base-`m` encoding with topic 0 as the most significant digit. Ordering
    /// by encoding is the lexicographic order on `rows`, which every solver
    /// uses to break ties.
    pub fn encode(&self, m: usize) -> u64 {
        self.rows
            .iter()
            .fold(0u64, |acc, &j| acc * m as u64 + j as u64)
    }

    pub fn decode(mut code: u64, k: usize, m: usize) -> Self {
        let mut rows = vec![0; k];
        for slot in rows.iter_mut().rev() {
            *slot = (code % m as u64) as usize;
            code /= m as u64;
        }
        Self { rows }
    }

    /// Number of topics hosted on a different server than in `other`.
    pub fn moves_from(&self, other: &Assignment) -> usize {
        self.rows
            .iter()
            .zip(&other.rows)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Per-topic traffic for one time step (messages per step).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TrafficVector(Vec<f64>);

impl TryFrom<Vec<f64>> for TrafficVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        TrafficVector::new(values)
    }
}

impl From<TrafficVector> for Vec<f64> {
    fn from(v: TrafficVector) -> Self {
        v.0
    }
}

impl TrafficVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return param_err("traffic entries must be finite and nonnegative");
        }
        Ok(Self(values))
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Euclidean distance to another vector of the same length.
    pub fn distance(&self, other: &TrafficVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }
}

/// The sequence `θ_1..θ_T`; index 0 holds `θ_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficSeries {
    k: usize,
    steps: Vec<TrafficVector>,
}

impl TrafficSeries {
    pub fn new(k: usize, steps: Vec<TrafficVector>) -> Result<Self> {
        if let Some((t, v)) = steps.iter().enumerate().find(|(_, v)| v.len() != k) {
            return shape_err(format!(
                "step {} has {} topics, expected k={k}",
                t + 1,
                v.len()
            ));
        }
        Ok(Self { k, steps })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[TrafficVector] {
        &self.steps
    }

    /// `θ_t` for 1-based `t`.
    pub fn at(&self, t: usize) -> Option<&TrafficVector> {
        t.checked_sub(1).and_then(|i| self.steps.get(i))
    }

    /// Values of topic `i` over the whole series.
    pub fn topic(&self, i: usize) -> Vec<f64> {
        self.steps.iter().map(|v| v.values()[i]).collect()
    }

    /// Steps `from..to` (0-based, half-open) as a new series.
    pub fn slice(&self, from: usize, to: usize) -> Self {
        Self {
            k: self.k,
            steps: self.steps[from..to].to_vec(),
        }
    }
}

pub(crate) fn makespan_unchecked(x: &[usize], theta: &[f64], loads: &mut [f64]) -> f64 {
    loads.iter_mut().for_each(|l| *l = 0.0);
    for (&j, &v) in x.iter().zip(theta) {
        loads[j] += v;
    }
    loads.iter().copied().fold(0.0, f64::max)
}

pub(crate) fn switching_unchecked(prev: &[usize], next: &[usize], u: &[f64]) -> f64 {
    prev.iter()
        .zip(next)
        .filter(|(a, b)| a != b)
        .map(|(&a, &b)| u[a] + u[b])
        .sum()
}

/// Largest server load `‖xᵀθ‖_∞`.
pub fn makespan(x: &Assignment, theta: &TrafficVector, shape: &ProblemShape) -> Result<f64> {
    shape.check_assignment(x)?;
    shape.check_traffic(theta)?;
    let mut loads = vec![0.0; shape.m()];
    Ok(makespan_unchecked(&x.rows, theta.values(), &mut loads))
}

/// `1ᵀ|x−y|u`: every moved topic pays the unit cost of both the server it
/// leaves and the server it joins.
pub fn switching_cost(prev: &Assignment, next: &Assignment, shape: &ProblemShape) -> Result<f64> {
    shape.check_assignment(prev)?;
    shape.check_assignment(next)?;
    Ok(switching_unchecked(&prev.rows, &next.rows, shape.unit_costs()))
}

/// Imbalance plus switching cost of executing `next` after `prev`.
pub fn step_cost(
    prev: &Assignment,
    next: &Assignment,
    theta: &TrafficVector,
    shape: &ProblemShape,
) -> Result<f64> {
    Ok(makespan(next, theta, shape)? + switching_cost(prev, next, shape)?)
}

/// `B = sup d(x, y)`: every topic moving between the two priciest servers.
pub fn max_switching_cost(shape: &ProblemShape) -> f64 {
    if shape.m() < 2 {
        return 0.0;
    }
    let mut u = shape.unit_costs().to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    shape.k() as f64 * (u[0] + u[1])
}

/// Lipschitz constant of the makespan in `θ` under the Euclidean norm.
///
/// The subgradient is the 0/1 indicator column of the busiest server, whose
/// norm is at most `√k`.
pub fn lipschitz_constant(shape: &ProblemShape) -> f64 {
    (shape.k() as f64).sqrt()
}

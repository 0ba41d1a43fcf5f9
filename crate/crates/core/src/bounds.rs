//! Regret-bound calculators, the window-count recursion, and the
//! one-dimensional adversarial instance behind the lower bound.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::RelaxedAssignment;
use crate::error::{param_err, Result};
use crate::model::{ProblemShape, TrafficSeries, TrafficVector};
use crate::objective::Objective;
use crate::plan::largest_window;
use crate::rng::SimRng;

/// `ε^(t)_{t+s-1} = scale·s^a / t^b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySchedule {
    pub a: f64,
    pub b: f64,
    pub scale: f64,
}

impl UncertaintySchedule {
    pub fn new(a: f64, b: f64, scale: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) || !(b >= 0.0 && b.is_finite()) {
            return param_err(format!("schedule exponents must be nonnegative (got a={a}, b={b})"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return param_err(format!("schedule scale must be positive (got {scale})"));
        }
        Ok(Self { a, b, scale })
    }

    /// Uncertainty of the forecast made at `t` for offset `s ≥ 1`.
    pub fn eps(&self, t: usize, s: usize) -> f64 {
        self.scale * (s as f64).powf(self.a) / (t as f64).powf(self.b)
    }
}

/// `2L·Σε`.
pub fn window_regret_bound(l: f64, eps: &[f64]) -> f64 {
    2.0 * l * eps.iter().sum::<f64>()
}

/// `2BI`.
pub fn total_regret_bound(b: f64, windows: usize) -> f64 {
    2.0 * b * windows as f64
}

/// Tiling of `1..=T` produced by the window rule on `schedule`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowRecursion {
    pub starts: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl WindowRecursion {
    pub fn count(&self) -> usize {
        self.starts.len()
    }
}

/// Iterate `T_1 = 1`, `T_{i+1} = T_i + S_i` with `S_i` from the window rule
/// at `t = T_i`, until the windows pass `T`. There is no `s_max` cap; a
/// window is only scanned as far as `T`, which leaves `I` unchanged.
pub fn simulate_window_recursion(
    schedule: &UncertaintySchedule,
    l: f64,
    b: f64,
    horizon: usize,
) -> Result<WindowRecursion> {
    if horizon == 0 {
        return param_err("recursion horizon must be at least 1");
    }
    if !(l > 0.0) || !(b >= 0.0) {
        return param_err("recursion needs L > 0 and B >= 0");
    }
    let mut starts = Vec::new();
    let mut sizes = Vec::new();
    let mut t = 1;
    while t <= horizon {
        let cap = horizon - t + 1;
        let size = largest_window((1..=cap).map(|s| schedule.eps(t, s)), l, b, cap);
        starts.push(t);
        sizes.push(size);
        t += size;
    }
    Ok(WindowRecursion { starts, sizes })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `f(x, θ) = L·|x − θ_0|` on one topic and two servers, reading server
/// index 0 or 1 as the scalar decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetDistance {
    pub lipschitz: f64,
}

impl Objective for TargetDistance {
    fn eval(&self, rows: &[usize], theta: &[f64], _scratch: &mut [f64]) -> f64 {
        self.lipschitz * (rows[0] as f64 - theta[0]).abs()
    }

    fn lipschitz(&self, _shape: &ProblemShape) -> f64 {
        self.lipschitz
    }

    fn relaxed_eval(&self, x: &RelaxedAssignment, theta: &[f64]) -> f64 {
        self.lipschitz * (x.get(0, 1) - theta[0]).abs()
    }

    fn relaxed_subgradient(&self, x: &RelaxedAssignment, theta: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; x.k() * x.m()];
        let gap = x.get(0, 1) - theta[0];
        if gap != 0.0 {
            grad[1] = self.lipschitz * gap.signum();
        }
        grad
    }
}

/// Adversarial instance: `θ_t = 1/2 ± δ_t` with a fair coin per step and
/// `δ_t = min(t^{-b}, 1/2)`. Predictions are the constant `1/2`, which is off
/// by exactly `δ_t`.
#[derive(Clone, Debug)]
pub struct LowerBoundInstance {
    pub b: f64,
    pub lipschitz: f64,
    pub series: TrafficSeries,
    pub shape: ProblemShape,
}

impl LowerBoundInstance {
    pub fn delta(&self, t: usize) -> f64 {
        lower_bound_delta(self.b, t)
    }

    pub fn objective(&self) -> TargetDistance {
        TargetDistance {
            lipschitz: self.lipschitz,
        }
    }

    pub fn prediction(&self) -> TrafficVector {
        TrafficVector::new(vec![0.5]).expect("constant prediction is valid")
    }

    /// Schedule whose `ε^(t)` dominates the prediction error for every step
    /// at or after `t`.
    pub fn schedule(&self) -> UncertaintySchedule {
        UncertaintySchedule {
            a: 0.0,
            b: self.b,
            scale: 1.0,
        }
    }

    /// Per-step cost of the clairvoyant decision, `L·(1/2 − δ_t)`.
    pub fn clairvoyant_cost(&self, t: usize) -> f64 {
        self.lipschitz * (0.5 - self.delta(t))
    }

    pub fn clairvoyant_total(&self) -> f64 {
        (1..=self.series.len()).map(|t| self.clairvoyant_cost(t)).sum()
    }
}

pub fn lower_bound_delta(b: f64, t: usize) -> f64 {
    (1.0 / (t as f64).powf(b)).min(0.5)
}

pub fn lower_bound_instance(b: f64, l: f64, horizon: usize, rng: &mut SimRng) -> Result<LowerBoundInstance> {
    if !(b >= 0.0) || !(l > 0.0) || horizon == 0 {
        return param_err("lower-bound instance needs b >= 0, L > 0 and T >= 1");
    }
    let steps = (1..=horizon)
        .map(|t| {
            let delta = lower_bound_delta(b, t);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            TrafficVector::new(vec![(0.5 + sign * delta).clamp(0.0, 1.0)])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LowerBoundInstance {
        b,
        lipschitz: l,
        series: TrafficSeries::new(1, steps)?,
        shape: ProblemShape::new(1, 2, vec![0.0, 0.0])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn calculator_examples() {
        assert_eq!(window_regret_bound(3.0, &[0.0; 4]), 0.0);
        assert_eq!(window_regret_bound(2.0, &[1.0, 1.0, 1.0]), 12.0);
        assert_eq!(total_regret_bound(5.0, 0), 0.0);
        assert_eq!(total_regret_bound(3.5, 7), 49.0);
    }

    #[test]
    fn schedule_examples() {
        let s = UncertaintySchedule::new(0.0, 1.0, 1.0).unwrap();
        assert!((1..=5).all(|k| s.eps(4, k) == 0.25));
        assert!(UncertaintySchedule::new(-1.0, 0.0, 1.0).is_err());
        assert!(UncertaintySchedule::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn stationary_schedule_gives_constant_windows() {
        let s = UncertaintySchedule::new(0.0, 0.0, 0.3).unwrap();
        // 2·1·0.3·S ≤ 2 ⇒ S = 3
        let rec = simulate_window_recursion(&s, 1.0, 2.0, 100).unwrap();
        assert_eq!(rec.count(), 34);
        assert!(rec.sizes[..33].iter().all(|&v| v == 3));
        for w in rec.starts.windows(2).zip(&rec.sizes) {
            assert_eq!(w.0[1] - w.0[0], *w.1);
        }
    }

    #[test]
    fn window_count_grows_like_sqrt_for_b_half() {
        let s = UncertaintySchedule::new(0.0, 0.5, 1.0).unwrap();
        let pts: Vec<(f64, f64)> = [1_000usize, 10_000, 100_000]
            .iter()
            .map(|&t| (t as f64, simulate_window_recursion(&s, 1.0, 2.0, t).unwrap().count() as f64))
            .collect();
        let slope = loglog_slope(&pts);
        assert!((0.35..=0.65).contains(&slope), "slope {slope}");
    }

    #[test]
    fn lower_bound_predictions_are_exactly_off_by_delta() {
        let inst = lower_bound_instance(0.5, 1.0, 200, &mut from_seed(3)).unwrap();
        for t in 1..=200 {
            let theta = inst.series.at(t).unwrap().values()[0];
            assert!(((theta - 0.5).abs() - inst.delta(t)).abs() < 1e-12);
            assert!(inst.delta(t) <= inst.schedule().eps(t, 1));
        }
    }

    #[test]
    fn lower_bound_expected_cost_is_half_l() {
        let l = 2.0;
        let mut total = 0.0;
        let n = 10_000;
        for seed in 0..n {
            let inst = lower_bound_instance(0.5, l, 1, &mut from_seed(seed)).unwrap();
            let theta = inst.series.at(1).unwrap().values()[0];
            total += inst.objective().eval(&[0], &[theta], &mut []);
        }
        let mean = total / n as f64;
        assert!((mean / (l / 2.0) - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn target_distance_subgradient() {
        let obj = TargetDistance { lipschitz: 3.0 };
        let x = RelaxedAssignment::uniform(1, 2);
        assert_eq!(obj.relaxed_subgradient(&x, &[0.9]), vec![0.0, -3.0]);
        assert_eq!(obj.relaxed_eval(&x, &[0.9]), 3.0 * 0.4);
    }
}

//! Gaussian-process forecaster with a rational quadratic kernel, and the
//! bounded-error predictors used by the regret-bound checks.
//!
//! A [`Forecast`] made at time `t` carries predicted traffic for
//! `t, t+1, ..., t+H-1` together with a scalar uncertainty per step: the
//! Euclidean norm of the per-topic posterior standard deviations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::UncertaintySchedule;
use crate::error::{param_err, shape_err, Error, Result};
use crate::model::{TrafficSeries, TrafficVector};
use crate::online::StreamView;
use crate::rng::SimRng;

/// `k(t, t') = σ² (1 + (t−t')² / (2αℓ²))^(−α)` plus observation noise `σ_n²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalQuadraticKernel {
    pub variance: f64,
    pub length_scale: f64,
    pub alpha: f64,
    #[serde(default)]
    pub noise_variance: f64,
}

impl RationalQuadraticKernel {
    pub fn new(variance: f64, length_scale: f64, alpha: f64, noise_variance: f64) -> Result<Self> {
        let kern = Self {
            variance,
            length_scale,
            alpha,
            noise_variance,
        };
        kern.validate()?;
        Ok(kern)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.variance, self.length_scale, self.alpha];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return param_err("kernel variance, length scale and alpha must be positive");
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return param_err("kernel noise variance must be nonnegative");
        }
        Ok(())
    }

    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        kernel_eval(self, t1, t2)
    }
}

pub fn kernel_eval(kern: &RationalQuadraticKernel, t1: f64, t2: f64) -> f64 {
    let d2 = (t1 - t2) * (t1 - t2);
    let base = 1.0 + d2 / (2.0 * kern.alpha * kern.length_scale * kern.length_scale);
    kern.variance * base.powf(-kern.alpha)
}

/// Lower Cholesky factor of `K + diag`, escalating the jitter from 1e-8
/// until the factorization succeeds.
pub(crate) fn cholesky_with_jitter(
    mut k: DMatrix<f64>,
    diag: f64,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = k.diagonal().amax().max(1.0);
    let mut jitter = 1e-8;
    for i in 0..k.nrows() {
        k[(i, i)] += diag;
    }
    for _ in 0..8 {
        let mut attempt = k.clone();
        for i in 0..attempt.nrows() {
            attempt[(i, i)] += jitter * scale;
        }
        if let Some(chol) = attempt.cholesky() {
            return Ok(chol);
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!(
        "kernel matrix of size {} not positive definite after jitter escalation",
        k.nrows()
    )))
}

/// GP posterior at `query_times` given observations at times `1..=n`.
///
/// The history is centered by its mean before regression and the mean is
/// added back to the predictions. Returns `(means, stds)`.
pub fn gp_fit_predict(
    history: &[f64],
    query_times: &[f64],
    kern: &RationalQuadraticKernel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if history.is_empty() {
        return param_err("GP regression needs a nonempty history");
    }
    kern.validate()?;
    let n = history.len();
    let times: Vec<f64> = (1..=n).map(|t| t as f64).collect();
    let offset = history.iter().sum::<f64>() / n as f64;
    let y = DVector::from_iterator(n, history.iter().map(|v| v - offset));

    let gram = DMatrix::from_fn(n, n, |i, j| kernel_eval(kern, times[i], times[j]));
    let chol = cholesky_with_jitter(gram, kern.noise_variance)?;
    let weights = chol.solve(&y);
    let lower = chol.l();

    let mut means = Vec::with_capacity(query_times.len());
    let mut stds = Vec::with_capacity(query_times.len());
    for &q in query_times {
        let cross = DVector::from_iterator(n, times.iter().map(|&t| kernel_eval(kern, t, q)));
        means.push(offset + cross.dot(&weights));
        let v = lower
            .solve_lower_triangular(&cross)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let var = kern.variance - v.norm_squared();
        stds.push(var.max(0.0).sqrt());
    }
    Ok((means, stds))
}

/// Predicted traffic and scalar uncertainties for `start_time..start_time+H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    start_time: usize,
    means: Vec<TrafficVector>,
    uncertainties: Vec<f64>,
}

impl Forecast {
    pub fn new(start_time: usize, means: Vec<TrafficVector>, uncertainties: Vec<f64>) -> Result<Self> {
        if means.is_empty() || means.len() != uncertainties.len() {
            return shape_err(format!(
                "forecast needs equal nonzero lengths (means {}, uncertainties {})",
                means.len(),
                uncertainties.len()
            ));
        }
        if uncertainties.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return param_err("uncertainties must be finite and nonnegative");
        }
        Ok(Self {
            start_time,
            means,
            uncertainties,
        })
    }

    pub fn start_time(&self) -> usize {
        self.start_time
    }

    pub fn horizon(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[TrafficVector] {
        &self.means
    }

    pub fn uncertainties(&self) -> &[f64] {
        &self.uncertainties
    }

    /// First `len` steps.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.clamp(1, self.horizon());
        Self {
            start_time: self.start_time,
            means: self.means[..len].to_vec(),
            uncertainties: self.uncertainties[..len].to_vec(),
        }
    }
}

/// GP forecaster settings. The kernel variance is multiplied by each topic's
/// empirical history variance when `scale_by_history_variance` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpForecastConfig {
    pub kernel: RationalQuadraticKernel,
    pub scale_by_history_variance: bool,
    /// Multiplier on the posterior standard deviation.
    pub z: f64,
}

impl Default for GpForecastConfig {
    fn default() -> Self {
        Self {
            kernel: RationalQuadraticKernel {
                variance: 1.0,
                length_scale: 5.0,
                alpha: 1.0,
                noise_variance: 0.1,
            },
            scale_by_history_variance: true,
            z: 1.0,
        }
    }
}

const MIN_SCALED_VARIANCE: f64 = 1e-6;

fn empirical_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Per-topic GP forecast from the revealed prefix `θ_1..θ_{t-1}`.
pub fn forecast(
    history: &[TrafficVector],
    t: usize,
    horizon: usize,
    config: &GpForecastConfig,
) -> Result<Forecast> {
    if history.len() < 2 {
        return param_err(format!("forecast needs at least 2 history points, got {}", history.len()));
    }
    if horizon == 0 {
        return param_err("forecast horizon must be at least 1");
    }
    if t != history.len() + 1 {
        return shape_err(format!(
            "forecast at t={t} needs exactly t-1 history points, got {}",
            history.len()
        ));
    }
    if !(config.z.is_finite() && config.z >= 0.0) {
        return param_err("uncertainty multiplier z must be nonnegative");
    }
    let k = history[0].len();
    let queries: Vec<f64> = (t..t + horizon).map(|s| s as f64).collect();
    let mut means = vec![vec![0.0; k]; horizon];
    let mut sq = vec![0.0; horizon];
    for i in 0..k {
        let series: Vec<f64> = history.iter().map(|v| v.values()[i]).collect();
        let mut kern = config.kernel;
        if config.scale_by_history_variance {
            kern.variance *= empirical_variance(&series).max(MIN_SCALED_VARIANCE);
        }
        let (mu, sd) = gp_fit_predict(&series, &queries, &kern)?;
        for (s, row) in means.iter_mut().enumerate() {
            row[i] = mu[s].max(0.0);
            sq[s] += sd[s] * sd[s];
        }
    }
    let means = means
        .into_iter()
        .map(TrafficVector::new)
        .collect::<Result<Vec<_>>>()?;
    let eps = sq.into_iter().map(|v| config.z * v.sqrt()).collect();
    Forecast::new(t, means, eps)
}

/// Forecast whose error obeys `‖mean_s − θ_s‖₂ ≤ ε_s` exactly: truth plus a
/// random perturbation of norm at most `bound(s)` (`s` counts from 1).
pub fn oracle_forecast(
    truth: &TrafficSeries,
    t: usize,
    horizon: usize,
    bound: impl Fn(usize) -> f64,
    rng: &mut SimRng,
) -> Result<Forecast> {
    if t == 0 || horizon == 0 || t + horizon - 1 > truth.len() {
        return param_err(format!(
            "oracle forecast window t={t}, H={horizon} exceeds series length {}",
            truth.len()
        ));
    }
    let k = truth.k();
    let mut means = Vec::with_capacity(horizon);
    let mut eps = Vec::with_capacity(horizon);
    for s in 1..=horizon {
        let target = truth.at(t + s - 1).expect("index checked above");
        let bound = bound(s);
        if !(bound.is_finite() && bound >= 0.0) {
            return param_err("uncertainty bound must be finite and nonnegative");
        }
        let dir: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let radius = bound * rng.random::<f64>() * (1.0 - 1e-12);
        let mut mean: Vec<f64> = target
            .values()
            .iter()
            .zip(&dir)
            .map(|(v, d)| if norm > 0.0 { (v + radius * d / norm).max(0.0) } else { *v })
            .collect();
        let candidate = TrafficVector::new(mean.clone())?;
        if candidate.distance(target) > bound {
            mean = target.values().to_vec();
        }
        means.push(TrafficVector::new(mean)?);
        eps.push(bound);
    }
    Forecast::new(t, means, eps)
}

/// Source of forecasts for the planning policies.
pub trait Predictor: Send {
    /// Forecast for `view.t() .. view.t() + horizon`.
    fn forecast(&mut self, view: &StreamView<'_>, horizon: usize) -> Result<Forecast>;
}

/// GP regression on the whole revealed prefix, refit at every call.
#[derive(Clone, Debug, Default)]
pub struct GpPredictor {
    pub config: GpForecastConfig,
}

impl GpPredictor {
    pub fn new(config: GpForecastConfig) -> Self {
        Self { config }
    }
}

impl Predictor for GpPredictor {
    fn forecast(&mut self, view: &StreamView<'_>, horizon: usize) -> Result<Forecast> {
        forecast(view.history(), view.t(), horizon, &self.config)
    }
}

/// Forecasts whose errors never exceed the reported uncertainties. It holds the true series,
/// so it exists for verification runs only.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    truth: TrafficSeries,
    schedule: UncertaintySchedule,
    rng: SimRng,
}

impl OraclePredictor {
    pub fn new(truth: TrafficSeries, schedule: UncertaintySchedule, rng: SimRng) -> Self {
        Self {
            truth,
            schedule,
            rng,
        }
    }
}

impl Predictor for OraclePredictor {
    fn forecast(&mut self, view: &StreamView<'_>, horizon: usize) -> Result<Forecast> {
        let t = view.t();
        let schedule = self.schedule;
        oracle_forecast(&self.truth, t, horizon, |s| schedule.eps(t, s), &mut self.rng)
    }
}

/// Predicts the same vector for every future step.
#[derive(Clone, Debug)]
pub struct ConstantPredictor {
    value: TrafficVector,
    schedule: UncertaintySchedule,
}

impl ConstantPredictor {
    pub fn new(value: TrafficVector, schedule: UncertaintySchedule) -> Self {
        Self { value, schedule }
    }
}

impl Predictor for ConstantPredictor {
    fn forecast(&mut self, view: &StreamView<'_>, horizon: usize) -> Result<Forecast> {
        let t = view.t();
        Forecast::new(
            t,
            vec![self.value.clone(); horizon],
            (1..=horizon).map(|s| self.schedule.eps(t, s)).collect(),
        )
    }
}

//! Seedable synthetic traffic: per topic, a sum of sine waves (seasonality),
//! an AR(1) trend, and a Gaussian-process sample, on top of a base level and
//! clamped from below.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::model::{TrafficSeries, TrafficVector};
use crate::predict::{cholesky_with_jitter, kernel_eval, RationalQuadraticKernel};
use crate::rng::{stream, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineSpec {
    pub period: f64,
    pub amplitude_low: f64,
    pub amplitude_high: f64,
}

/// Component indices used for RNG substream labels and weights.
const SINE: u64 = 0;
const AR: u64 = 1;
const GP: u64 = 2;

/// Shape of the generative model, shared by every trial of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    pub sine_specs: Vec<SineSpec>,
    pub ar_coeff: f64,
    pub ar_noise_std: f64,
    pub gp_kernel: RationalQuadraticKernel,
    /// Weights on the (sine, AR, GP) components.
    pub component_weights: [f64; 3],
    pub base_offset: f64,
    pub clamp_floor: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            sine_specs: vec![
                SineSpec {
                    period: 24.0,
                    amplitude_low: 1.0,
                    amplitude_high: 2.0,
                },
                SineSpec {
                    period: 2.0,
                    amplitude_low: 0.5,
                    amplitude_high: 1.0,
                },
            ],
            ar_coeff: 0.9,
            ar_noise_std: 0.5,
            gp_kernel: RationalQuadraticKernel {
                variance: 1.0,
                length_scale: 10.0,
                alpha: 1.0,
                noise_variance: 0.0,
            },
            component_weights: [1.0, 1.0, 1.0],
            base_offset: 5.0,
            clamp_floor: 0.0,
        }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ar_coeff.abs() < 1.0) {
            return param_err(format!("traffic.ar_coeff must satisfy |coeff| < 1 (got {})", self.ar_coeff));
        }
        if !(self.ar_noise_std >= 0.0) {
            return param_err("traffic.ar_noise_std must be nonnegative");
        }
        for spec in &self.sine_specs {
            if !(spec.period > 0.0) {
                return param_err("traffic.sine_specs period must be positive");
            }
            if !(spec.amplitude_low <= spec.amplitude_high) {
                return param_err("traffic.sine_specs needs amplitude_low <= amplitude_high");
            }
        }
        if self.component_weights.iter().any(|w| !w.is_finite()) {
            return param_err("traffic.component_weights must be finite");
        }
        if !(self.base_offset.is_finite()) {
            return param_err("traffic.base_offset must be finite");
        }
        if !(self.clamp_floor >= 0.0) {
            return param_err("traffic.clamp_floor must be nonnegative");
        }
        self.gp_kernel.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficGenConfig {
    pub seed: u64,
    pub k: usize,
    pub horizon: usize,
    #[serde(default)]
    pub params: TrafficParams,
}

impl TrafficGenConfig {
    /// Ten topics over 150 steps with 24- and 2-step seasonality.
    pub fn full(seed: u64) -> Self {
        Self::with_topics(seed, 10, 150)
    }

    pub fn with_topics(seed: u64, k: usize, horizon: usize) -> Self {
        Self {
            seed,
            k,
            horizon,
            params: TrafficParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return param_err("traffic.k must be at least 1");
        }
        if self.horizon == 0 {
            return param_err("traffic.horizon must be at least 1");
        }
        self.params.validate()
    }
}

pub fn sine_component(period: f64, amplitude: f64, phase: f64, t: i64) -> Result<f64> {
    if !(period > 0.0) {
        return param_err(format!("sine period must be positive (got {period})"));
    }
    Ok(amplitude * (2.0 * PI * t as f64 / period + phase).sin())
}

/// `y_0 = 0`, `y_{t+1} = coeff·y_t + (1−coeff)·w_t` with `w_t ~ N(0, noise_std²)`.
pub fn ar1_path(coeff: f64, noise_std: f64, horizon: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    if !(coeff.abs() < 1.0) {
        return param_err(format!("AR(1) coefficient must satisfy |coeff| < 1 (got {coeff})"));
    }
    let noise = Normal::new(0.0, noise_std)
        .map_err(|e| Error::Parameter(format!("AR(1) noise: {e}")))?;
    let mut path = Vec::with_capacity(horizon);
    let mut y = 0.0;
    for _ in 0..horizon {
        path.push(y);
        y = coeff * y + (1.0 - coeff) * noise.sample(rng);
    }
    Ok(path)
}

/// One draw of a zero-mean GP over times `1..=horizon`.
pub fn gp_path(kern: &RationalQuadraticKernel, horizon: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    if horizon == 0 {
        return param_err("GP path horizon must be at least 1");
    }
    kern.validate()?;
    let gram = DMatrix::from_fn(horizon, horizon, |i, j| {
        kernel_eval(kern, (i + 1) as f64, (j + 1) as f64)
    });
    let chol = cholesky_with_jitter(gram, kern.noise_variance)?;
    let z = DVector::from_iterator(horizon, (0..horizon).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok((chol.l() * z).iter().copied().collect())
}

pub fn generate_traffic(config: &TrafficGenConfig) -> Result<TrafficSeries> {
    config.validate()?;
    let (k, horizon) = (config.k, config.horizon);
    let params = &config.params;
    let [w_sine, w_ar, w_gp] = params.component_weights;
    let mut columns = Vec::with_capacity(k);
    for topic in 0..k as u64 {
        let mut sine_rng = stream(config.seed, &[topic, SINE]);
        let waves: Vec<(f64, f64, f64)> = params
            .sine_specs
            .iter()
            .map(|spec| {
                let amp = if spec.amplitude_high > spec.amplitude_low {
                    sine_rng.random_range(spec.amplitude_low..spec.amplitude_high)
                } else {
                    spec.amplitude_low
                };
                let phase = sine_rng.random_range(0.0..2.0 * PI);
                (spec.period, amp, phase)
            })
            .collect();
        let ar = ar1_path(
            params.ar_coeff,
            params.ar_noise_std,
            horizon,
            &mut stream(config.seed, &[topic, AR]),
        )?;
        let gp = gp_path(&params.gp_kernel, horizon, &mut stream(config.seed, &[topic, GP]))?;

        let mut col = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let mut seasonal = 0.0;
            for &(period, amp, phase) in &waves {
                seasonal += sine_component(period, amp, phase, t as i64)?;
            }
            let v = params.base_offset + w_sine * seasonal + w_ar * ar[t - 1] + w_gp * gp[t - 1];
            col.push(v.max(params.clamp_floor));
        }
        columns.push(col);
    }
    let steps = (0..horizon)
        .map(|t| TrafficVector::new(columns.iter().map(|c| c[t]).collect()))
        .collect::<Result<Vec<_>>>()?;
    TrafficSeries::new(k, steps)
}

/// CSV with header `t,topic_0,...,topic_{k-1}`; `t` starts at 1. Floats use
/// the shortest representation that round-trips.
pub fn write_traffic_csv<W: Write>(series: &TrafficSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((0..series.k()).map(|i| format!("topic_{i}")));
    w.write_record(&header)?;
    for (t, step) in series.steps().iter().enumerate() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(step.values().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_traffic_csv<R: Read>(reader: R) -> Result<TrafficSeries> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("t") {
        return param_err("traffic CSV must start with a `t` column");
    }
    let k = headers.len() - 1;
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h != format!("topic_{i}") {
            return param_err(format!("unexpected traffic CSV column `{h}`"));
        }
    }
    let mut steps = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parameter(format!("row {}: bad value `{f}`: {e}", row + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        steps.push(TrafficVector::new(values)?);
    }
    TrafficSeries::new(k, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn sine_examples() {
        assert_eq!(sine_component(24.0, 1.0, 0.0, 0).unwrap(), 0.0);
        assert!((sine_component(24.0, 1.0, 0.0, 6).unwrap() - 1.0).abs() < 1e-15);
        assert!(sine_component(2.0, 0.7, 0.0, 1).unwrap().abs() < 1e-12);
        assert!(sine_component(0.0, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn ar_examples() {
        let path = ar1_path(0.9, 0.0, 50, &mut from_seed(1)).unwrap();
        assert!(path.iter().all(|v| *v == 0.0));
        let a = ar1_path(0.9, 1.0, 100, &mut from_seed(5)).unwrap();
        let b = ar1_path(0.9, 1.0, 100, &mut from_seed(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(ar1_path(1.0, 1.0, 10, &mut from_seed(5)).is_err());
    }

    #[test]
    fn ar_autocorrelation() {
        let path = ar1_path(0.9, 1.0, 10_000, &mut from_seed(11)).unwrap();
        let n = path.len() as f64;
        let mean = path.iter().sum::<f64>() / n;
        let var: f64 = path.iter().map(|v| (v - mean).powi(2)).sum();
        let cov: f64 = path.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let rho = cov / var;
        assert!((0.85..=0.95).contains(&rho), "lag-1 autocorrelation {rho}");
    }

    #[test]
    fn gp_path_is_deterministic() {
        let kern = RationalQuadraticKernel::new(1.0, 10.0, 1.0, 0.0).unwrap();
        let a = gp_path(&kern, 30, &mut from_seed(2)).unwrap();
        assert_eq!(a, gp_path(&kern, 30, &mut from_seed(2)).unwrap());
        assert!(gp_path(&kern, 0, &mut from_seed(2)).is_err());
    }

    #[test]
    fn gp_path_marginal_and_adjacent_covariance() {
        let kern = RationalQuadraticKernel::new(2.0, 3.0, 1.0, 0.0).unwrap();
        let n = 10_000;
        let mut single = Vec::with_capacity(n);
        let mut pairs = Vec::with_capacity(n);
        for seed in 0..n as u64 {
            single.push(gp_path(&kern, 1, &mut from_seed(seed)).unwrap()[0]);
            let p = gp_path(&kern, 2, &mut from_seed(seed + 1_000_000)).unwrap();
            pairs.push((p[0], p[1]));
        }
        let sd = (single.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        assert!((sd / 2f64.sqrt() - 1.0).abs() < 0.05, "std {sd}");
        let cov = pairs.iter().map(|(a, b)| a * b).sum::<f64>() / n as f64;
        let target = kernel_eval(&kern, 1.0, 2.0);
        assert!((cov / target - 1.0).abs() < 0.10, "cov {cov} vs {target}");
    }

    #[test]
    fn constant_when_weights_are_zero() {
        let mut cfg = TrafficGenConfig::full(3);
        cfg.params.component_weights = [0.0; 3];
        let series = generate_traffic(&cfg).unwrap();
        assert!(series.steps().iter().all(|v| v.values().iter().all(|&x| x == 5.0)));
    }

    #[test]
    fn full_config_is_nonnegative_and_deterministic() {
        let cfg = TrafficGenConfig::full(42);
        let a = generate_traffic(&cfg).unwrap();
        assert_eq!(a.len(), 150);
        assert_eq!(a.k(), 10);
        assert!(a.steps().iter().all(|v| v.values().iter().all(|x| x.is_finite() && *x >= 0.0)));
        let b = generate_traffic(&cfg).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_traffic_csv(&a, &mut ca).unwrap();
        write_traffic_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn seasonal_part_has_period_24() {
        let mut cfg = TrafficGenConfig::full(8);
        cfg.params.component_weights = [1.0, 0.0, 0.0];
        cfg.horizon = 96;
        let s = generate_traffic(&cfg).unwrap();
        for t in 0..72 {
            for (a, b) in s.steps()[t].values().iter().zip(s.steps()[t + 24].values()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn adding_topics_leaves_existing_topics_unchanged() {
        let small = generate_traffic(&TrafficGenConfig::with_topics(4, 3, 40)).unwrap();
        let big = generate_traffic(&TrafficGenConfig::with_topics(4, 6, 40)).unwrap();
        for i in 0..3 {
            assert_eq!(small.topic(i), big.topic(i));
        }
    }

    #[test]
    fn clamp_floor_holds() {
        let mut cfg = TrafficGenConfig::full(1);
        cfg.params.base_offset = 0.0;
        cfg.params.clamp_floor = 0.25;
        let s = generate_traffic(&cfg).unwrap();
        assert!(s.steps().iter().all(|v| v.values().iter().all(|&x| x >= 0.25)));
    }

    #[test]
    fn csv_round_trip_preserves_floats() {
        let series = generate_traffic(&TrafficGenConfig::with_topics(9, 4, 25)).unwrap();
        let mut buf = Vec::new();
        write_traffic_csv(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,topic_0,topic_1,topic_2,topic_3\n1,"));
        assert_eq!(read_traffic_csv(buf.as_slice()).unwrap(), series);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = TrafficGenConfig::full(0);
        cfg.params.ar_coeff = 1.2;
        assert!(generate_traffic(&cfg).is_err());
        let mut cfg = TrafficGenConfig::full(0);
        cfg.horizon = 0;
        assert!(generate_traffic(&cfg).is_err());
        let mut cfg = TrafficGenConfig::full(0);
        cfg.params.sine_specs[0].amplitude_low = 3.0;
        assert!(generate_traffic(&cfg).is_err());
    }
}

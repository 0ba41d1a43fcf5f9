//! Python bindings: shapes and cost primitives, traffic generation,
//! forecasting, plan solvers, the window rule, experiments and bound checks.
//!
//! Assignments cross the boundary as lists of server indices and traffic as
//! lists of floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use smooco_core::bench::{run_experiment as run_bench, ExperimentConfig};
use smooco_core::plan::select_window as select;
use smooco_core::predict::{forecast, GpForecastConfig};
use smooco_core::solve::{PlanSolver, PlanningProblem};
use smooco_core::traffic::{generate_traffic as generate, TrafficGenConfig};
use smooco_core::verify::{run_suite, Suite, VerifyOptions};
use smooco_core::{Assignment, Error, Makespan, TrafficSeries, TrafficVector};

fn py_err(err: Error) -> PyErr {
    match err {
        Error::Numerical(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn assignment(rows: Vec<usize>, m: usize) -> PyResult<Assignment> {
    Assignment::new(rows, m).map_err(py_err)
}

fn traffic(values: Vec<f64>) -> PyResult<TrafficVector> {
    TrafficVector::new(values).map_err(py_err)
}

fn series(k: usize, rows: Vec<Vec<f64>>) -> PyResult<TrafficSeries> {
    let steps = rows.into_iter().map(traffic).collect::<PyResult<Vec<_>>>()?;
    TrafficSeries::new(k, steps).map_err(py_err)
}

fn to_rows(series: &TrafficSeries) -> Vec<Vec<f64>> {
    series.steps().iter().map(|v| v.values().to_vec()).collect()
}

/// `k` topics on `m` servers with per-server unit switching costs.
#[pyclass(module = "smooco", frozen, skip_from_py_object)]
pub struct ProblemShape {
    inner: smooco_core::ProblemShape,
}

#[pymethods]
impl ProblemShape {
    #[new]
    fn new(k: usize, m: usize, unit_costs: Vec<f64>) -> PyResult<Self> {
        let inner = smooco_core::ProblemShape::new(k, m, unit_costs).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn unit_costs(&self) -> Vec<f64> {
        self.inner.unit_costs().to_vec()
    }

    fn lipschitz_constant(&self) -> f64 {
        smooco_core::lipschitz_constant(&self.inner)
    }

    fn max_switching_cost(&self) -> f64 {
        smooco_core::max_switching_cost(&self.inner)
    }

    fn makespan(&self, x: Vec<usize>, theta: Vec<f64>) -> PyResult<f64> {
        smooco_core::makespan(&assignment(x, self.inner.m())?, &traffic(theta)?, &self.inner).map_err(py_err)
    }

    fn switching_cost(&self, old: Vec<usize>, new: Vec<usize>) -> PyResult<f64> {
        let m = self.inner.m();
        smooco_core::switching_cost(&assignment(old, m)?, &assignment(new, m)?, &self.inner).map_err(py_err)
    }

    fn step_cost(&self, prev: Vec<usize>, x: Vec<usize>, theta: Vec<f64>) -> PyResult<f64> {
        let m = self.inner.m();
        smooco_core::step_cost(&assignment(prev, m)?, &assignment(x, m)?, &traffic(theta)?, &self.inner)
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "ProblemShape(k={}, m={}, unit_costs={:?})",
            self.inner.k(),
            self.inner.m(),
            self.inner.unit_costs()
        )
    }
}

/// Synthetic traffic, one row of `k` values per step.
#[pyfunction]
#[pyo3(signature = (seed, k, horizon))]
fn generate_traffic(seed: u64, k: usize, horizon: usize) -> PyResult<Vec<Vec<f64>>> {
    let series = generate(&TrafficGenConfig::with_topics(seed, k, horizon)).map_err(py_err)?;
    Ok(to_rows(&series))
}

/// GP forecast of the next `horizon` steps after `history`; returns
/// `(means, uncertainties)`.
#[pyfunction]
fn gp_forecast(history: Vec<Vec<f64>>, horizon: usize) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let k = history.first().map_or(0, Vec::len);
    let s = series(k, history)?;
    let f = forecast(s.steps(), s.len() + 1, horizon, &GpForecastConfig::default()).map_err(py_err)?;
    Ok((
        f.means().iter().map(|v| v.values().to_vec()).collect(),
        f.uncertainties().to_vec(),
    ))
}

/// Offline plan for `thetas` from `initial`; returns `(assignments, cost)`.
/// `solver` is `"exact"` or `"iterative"`.
#[pyfunction]
#[pyo3(signature = (shape, thetas, initial, solver = "iterative", seed = 0))]
fn solve_plan(
    shape: &ProblemShape,
    thetas: Vec<Vec<f64>>,
    initial: Vec<usize>,
    solver: &str,
    seed: u64,
) -> PyResult<(Vec<Vec<usize>>, f64)> {
    let solver = match solver {
        "exact" => PlanSolver::exact(),
        "iterative" => PlanSolver::default(),
        other => return Err(PyValueError::new_err(format!("unknown solver `{other}`"))),
    };
    let steps = thetas.into_iter().map(traffic).collect::<PyResult<Vec<_>>>()?;
    let problem = PlanningProblem::new(shape.inner.clone(), steps, assignment(initial, shape.inner.m())?)
        .map_err(py_err)?;
    let mut rng = smooco_core::rng::from_seed(seed);
    let result = solver.solve(&Makespan, &problem, &mut rng).map_err(py_err)?;
    Ok((
        result.assignments.iter().map(|a| a.rows().to_vec()).collect(),
        result.total_cost,
    ))
}

/// Largest window `S <= s_max` with `2L·Σε <= B`, at least 1.
#[pyfunction]
#[pyo3(signature = (uncertainties, lipschitz, switch_bound, s_max = 20))]
fn select_window(uncertainties: Vec<f64>, lipschitz: f64, switch_bound: f64, s_max: usize) -> PyResult<usize> {
    select(&uncertainties, lipschitz, switch_bound, s_max).map_err(py_err)
}

/// Run an experiment from a TOML config; returns `(algorithm, mean final
/// regret)` pairs and the per-step CSV text.
#[pyfunction]
#[pyo3(signature = (config_toml, workers = 1))]
fn run_experiment(py: Python<'_>, config_toml: &str, workers: usize) -> PyResult<(Vec<(String, f64)>, String)> {
    let config: ExperimentConfig =
        toml::from_str(config_toml).map_err(|e| PyValueError::new_err(format!("invalid config: {e}")))?;
    let result = py.detach(|| run_bench(&config, workers)).map_err(py_err)?;
    let mut csv = Vec::new();
    result.write_steps_csv(&mut csv).map_err(py_err)?;
    let regrets = result
        .mean_final_regret()
        .into_iter()
        .map(|(a, r)| (a.to_string(), r))
        .collect();
    Ok((regrets, String::from_utf8(csv).expect("csv output is utf-8")))
}

/// Run a bound-check suite; returns `(check, instances, violations,
/// max_slack)` rows.
#[pyfunction]
#[pyo3(signature = (suite, seed = 0, instances = None))]
fn verify(py: Python<'_>, suite: &str, seed: u64, instances: Option<usize>) -> PyResult<Vec<(String, usize, usize, f64)>> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let options = VerifyOptions {
        seed,
        instances,
        exponents: None,
    };
    let rows = py.detach(|| run_suite(suite, &options)).map_err(py_err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.check, r.instances, r.violations, r.max_slack))
        .collect())
}

#[pymodule]
fn smooco(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ProblemShape>()?;
    m.add_function(wrap_pyfunction!(generate_traffic, m)?)?;
    m.add_function(wrap_pyfunction!(gp_forecast, m)?)?;
    m.add_function(wrap_pyfunction!(solve_plan, m)?)?;
    m.add_function(wrap_pyfunction!(select_window, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}

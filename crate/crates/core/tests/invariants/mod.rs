//! Randomized module invariants. Shared by the core property tests and the
//! acceptance run; each check draws `cases` inputs and returns the first
//! failure.

#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use smooco_core::baselines::project_row_simplex;
use smooco_core::bench::cumulative_regret;
use smooco_core::bounds::{simulate_window_recursion, UncertaintySchedule};
use smooco_core::model::{
    lipschitz_constant, makespan, switching_cost, Assignment, ProblemShape, TrafficSeries, TrafficVector,
};
use smooco_core::objective::Makespan;
use smooco_core::plan::{dynamic_planning_run, fixed_window_run, select_window, PlanningSetup};
use smooco_core::predict::{gp_fit_predict, ConstantPredictor, RationalQuadraticKernel};
use smooco_core::solve::PlanSolver;

pub const CASES: u32 = 10_000;

pub type Check = fn(u32) -> Result<(), String>;

pub const CHECKS: [(&str, Check); 8] = [
    ("ledger decomposition", ledger_decomposes),
    ("switching-cost metric axioms", switching_cost_is_a_metric),
    ("Lipschitz inequality", makespan_is_lipschitz),
    ("simplex projection", simplex_projection_is_nearest),
    ("GP variance monotonicity", gp_variance_is_monotone),
    ("window rule maximality", window_rule_is_maximal),
    ("recursion tiling", recursion_tiles),
    ("planning window tiling", planning_windows_tile),
];

pub fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn shape_strategy(max_k: usize, max_m: usize, min_u: f64) -> impl Strategy<Value = ProblemShape> {
    (1..=max_k, 1..=max_m).prop_flat_map(move |(k, m)| {
        prop::collection::vec(min_u..2.0, m).prop_map(move |u| ProblemShape::new(k, m, u).unwrap())
    })
}

fn assignment_strategy(k: usize, m: usize) -> impl Strategy<Value = Assignment> {
    prop::collection::vec(0..m, k).prop_map(move |rows| Assignment::new(rows, m).unwrap())
}

fn traffic_strategy(k: usize) -> impl Strategy<Value = TrafficVector> {
    prop::collection::vec(0.0..10.0f64, k).prop_map(|v| TrafficVector::new(v).unwrap())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn ledger_decomposes(cases: u32) -> Result<(), String> {
    let strategy = shape_strategy(5, 3, 0.0).prop_flat_map(|shape| {
        let (k, m) = (shape.k(), shape.m());
        (
            Just(shape),
            assignment_strategy(k, m),
            prop::collection::vec(
                (assignment_strategy(k, m), assignment_strategy(k, m), traffic_strategy(k)),
                1..12,
            ),
        )
    });
    run(cases, strategy, |(shape, x0, steps)| {
        let alg: Vec<Assignment> = steps.iter().map(|p| p.0.clone()).collect();
        let bench: Vec<Assignment> = steps.iter().map(|p| p.1.clone()).collect();
        let thetas: Vec<TrafficVector> = steps.iter().map(|p| p.2.clone()).collect();
        let ledger = cumulative_regret(&Makespan, &alg, &bench, &thetas, 1, &x0, &shape).unwrap();
        let (mut alg_total, mut bench_total) = (0.0, 0.0);
        for row in &ledger.rows {
            prop_assert!((row.cum_regret - row.cum_imb_regret - row.cum_sw_regret).abs() <= 1e-9);
            alg_total += row.imbalance + row.switching;
            bench_total += row.bench_imbalance + row.bench_switching;
        }
        prop_assert!((ledger.final_regret() - (alg_total - bench_total)).abs() <= 1e-9 * (1.0 + alg_total));
        Ok(())
    })
}

pub fn switching_cost_is_a_metric(cases: u32) -> Result<(), String> {
    let strategy = shape_strategy(8, 4, 0.01).prop_flat_map(|shape| {
        let (k, m) = (shape.k(), shape.m());
        (
            Just(shape),
            assignment_strategy(k, m),
            assignment_strategy(k, m),
            assignment_strategy(k, m),
        )
    });
    run(cases, strategy, |(shape, a, b, c)| {
        let d = |x: &Assignment, y: &Assignment| switching_cost(x, y, &shape).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b) == 0.0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        Ok(())
    })
}

pub fn makespan_is_lipschitz(cases: u32) -> Result<(), String> {
    let strategy = shape_strategy(8, 4, 0.0).prop_flat_map(|shape| {
        let (k, m) = (shape.k(), shape.m());
        (Just(shape), assignment_strategy(k, m), traffic_strategy(k), traffic_strategy(k))
    });
    run(cases, strategy, |(shape, x, t1, t2)| {
        let gap = (makespan(&x, &t1, &shape).unwrap() - makespan(&x, &t2, &shape).unwrap()).abs();
        let diff: Vec<f64> = t1.values().iter().zip(t2.values()).map(|(p, q)| p - q).collect();
        prop_assert!(gap <= lipschitz_constant(&shape) * norm(&diff) + 1e-9);
        Ok(())
    })
}

pub fn simplex_projection_is_nearest(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(-5.0..5.0f64, 1..8),
        prop::collection::vec(1e-6..1.0f64, 8),
    );
    run(cases, strategy, |(v, q_raw)| {
        let p = project_row_simplex(&v);
        prop_assert_eq!(p.len(), v.len());
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let again = project_row_simplex(&p);
        prop_assert!(again.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-12));
        // any other point of the simplex is at least as far from v
        let q_sum: f64 = q_raw[..v.len()].iter().sum();
        let q: Vec<f64> = q_raw[..v.len()].iter().map(|x| x / q_sum).collect();
        let dist = |w: &[f64]| norm(&v.iter().zip(w).map(|(a, b)| a - b).collect::<Vec<_>>());
        prop_assert!(dist(&p) <= dist(&q) + 1e-9);
        Ok(())
    })
}

/// Posterior std at fixed future times never grows when one more
/// observation is added, and grows with the lead time.
pub fn gp_variance_is_monotone(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(0.0..10.0f64, 2..25),
        1.0..10.0f64,
        0.5..3.0f64,
        0.01..1.0f64,
    );
    run(cases, strategy, |(history, length_scale, alpha, noise)| {
        let kern = RationalQuadraticKernel::new(1.0, length_scale, alpha, noise).unwrap();
        let n = history.len();
        let queries: Vec<f64> = (1..=6).map(|s| (n + s) as f64).collect();
        let (_, with_all) = gp_fit_predict(&history, &queries, &kern).unwrap();
        let (_, with_fewer) = gp_fit_predict(&history[..n - 1], &queries, &kern).unwrap();
        for (a, b) in with_all.iter().zip(&with_fewer) {
            prop_assert!(*a <= b + 1e-6, "{} > {}", a, b);
        }
        for w in with_all.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-6, "{:?}", with_all);
        }
        Ok(())
    })
}

pub fn window_rule_is_maximal(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(0.0..2.0f64, 1..30),
        0.1..3.0f64,
        0.0..10.0f64,
        1usize..25,
    );
    run(cases, strategy, |(eps, l, b, s_max)| {
        let s = select_window(&eps, l, b, s_max).unwrap();
        let cap = s_max.min(eps.len());
        prop_assert!(s >= 1 && s <= cap);
        let fits = |n: usize| 2.0 * l * eps[..n].iter().sum::<f64>() <= b;
        prop_assert!(s == 1 || fits(s));
        prop_assert!(s == cap || !fits(s + 1));
        Ok(())
    })
}

pub fn recursion_tiles(cases: u32) -> Result<(), String> {
    let strategy = (0.0..2.0f64, 0.0..2.0f64, 0.01..2.0f64, 0.0..5.0f64, 1usize..300);
    run(cases, strategy, |(a, b, scale, bound, horizon)| {
        let schedule = UncertaintySchedule::new(a, b, scale).unwrap();
        let rec = simulate_window_recursion(&schedule, 1.0, bound, horizon).unwrap();
        prop_assert_eq!(rec.starts[0], 1);
        for i in 1..rec.count() {
            prop_assert_eq!(rec.starts[i], rec.starts[i - 1] + rec.sizes[i - 1]);
        }
        prop_assert!(rec.sizes.iter().all(|s| *s >= 1));
        prop_assert_eq!(rec.starts.last().unwrap() + rec.sizes.last().unwrap() - 1, horizon);
        Ok(())
    })
}

pub fn planning_windows_tile(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(prop::collection::vec(0.0..5.0f64, 2), 2..25),
        0.0..1.5f64,
        prop::option::of(1usize..6),
    );
    run(cases, strategy, |(steps, schedule_b, fixed)| {
        let shape = ProblemShape::new(2, 2, vec![0.5, 1.0]).unwrap();
        let steps = steps.into_iter().map(|v| TrafficVector::new(v).unwrap()).collect();
        let series = TrafficSeries::new(2, steps).unwrap();
        let x0 = Assignment::constant(2, 0);
        let setup = PlanningSetup {
            series: &series,
            predictor: Box::new(ConstantPredictor::new(
                TrafficVector::new(vec![2.5, 2.5]).unwrap(),
                UncertaintySchedule::new(0.0, schedule_b, 0.5).unwrap(),
            )),
            solver: PlanSolver::exact(),
            shape: &shape,
            objective: Arc::new(Makespan),
            x0: &x0,
            t_start: 1,
            t_end: series.len(),
            seed: 0,
        };
        let (run, trace) = match fixed {
            Some(size) => fixed_window_run(setup, size).unwrap(),
            None => dynamic_planning_run(setup, 20).unwrap(),
        };
        prop_assert_eq!(run.len(), series.len());
        prop_assert!(trace.tiles(1, series.len()));
        let (mut expected_id, mut left) = (0, 0);
        for w in &run.windows {
            let (id, size) = w.unwrap();
            if left == 0 {
                expected_id += 1;
                left = size;
            }
            prop_assert_eq!(id, expected_id);
            left -= 1;
        }
        prop_assert_eq!(left, 0);
        Ok(())
    })
}

//! Smoothed online combinatorial optimization with imperfect predictions.
//!
//! Topics carrying time-varying traffic are assigned to servers. Each step
//! costs the makespan of the assignment plus a switching cost for every topic
//! that moves. The crate provides:
//!
//! - cost primitives and domain types ([`model`], [`objective`]),
//! - a seeded synthetic traffic generator ([`traffic`]),
//! - a Gaussian-process forecaster with per-step uncertainties ([`predict`]),
//! - offline planners: exact DP and iterative temporal decoupling ([`solve`]),
//! - planning-window policies driven by forecast uncertainty ([`plan`]),
//! - non-predictive baselines ([`baselines`]),
//! - the regret harness and experiment runner ([`bench`]),
//! - bound calculators and empirical checks of the regret guarantees
//!   ([`bounds`], [`verify`]).

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod bounds;
pub mod error;
pub mod model;
pub mod objective;
pub mod online;
pub mod plan;
pub mod predict;
pub mod rng;
pub mod solve;
pub mod traffic;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    lipschitz_constant, makespan, max_switching_cost, step_cost, switching_cost, Assignment,
    ProblemShape, TrafficSeries, TrafficVector,
};
pub use objective::{Makespan, Objective};

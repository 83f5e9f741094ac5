//! Multi-distribution learning with on-demand sampling.
//!
//! Exact finite instances (`problem`), a Hedge and matrix-game toolkit
//! (`game`), a seeded count-based sampling layer (`sampling`), the learners
//! themselves (`learners`), instance generators (`instances`) and trajectory
//! diagnostics (`diagnostics`).
//!
//! The problem, game and diagnostics types are generic over the float type;
//! the aliases below fix it to `f32` or `f64`. Sampling and the learners run
//! in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

pub mod diagnostics;
pub mod error;
pub mod game;
pub mod instances;
pub mod json;
pub mod learners;
pub mod problem;
pub mod sampling;
pub mod scalar;

pub use error::{MdlError, Result};

pub type InstanceF32 = problem::Instance<f32>;
pub type InstanceF64 = problem::Instance<f64>;
pub type LossDistF32 = problem::LossDist<f32>;
pub type LossDistF64 = problem::LossDist<f64>;
pub type RandomizedHypothesisF32 = problem::RandomizedHypothesis<f32>;
pub type RandomizedHypothesisF64 = problem::RandomizedHypothesis<f64>;
pub type HedgeWeightsF32 = game::HedgeWeights<f32>;
pub type HedgeWeightsF64 = game::HedgeWeights<f64>;
pub type GameSolutionF32 = game::GameSolution<f32>;
pub type GameSolutionF64 = game::GameSolution<f64>;
pub type TrajectoryF32 = diagnostics::Trajectory<f32>;
pub type TrajectoryF64 = diagnostics::Trajectory<f64>;

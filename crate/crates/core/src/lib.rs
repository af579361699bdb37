//! Component-wise approximate Bayesian computation.
//!
//! Likelihood-free inference for blocked models: a vanilla rejection sampler,
//! component-wise ABC with Gibbs-like steps (generic and hierarchical
//! variants, including a retention kernel), and an adaptive SMC sampler —
//! all generic over a pluggable [`model::Model`] contract, together with the
//! benchmark models and the diagnostics used to compare sampler output
//! against analytic oracles.

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod model;
pub mod models;
pub mod rng;
pub mod samplers;
pub mod stats;

pub use error::{Error, Result};
pub use model::{BudgetCounter, Dataset, Model, ParamState, ToleranceRule};
pub use rng::RngStream;

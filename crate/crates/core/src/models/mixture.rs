//! Mixture-of-uniforms model with a separation constraint on the prior.
//!
//! A single observation `x ~ (1/2) U(theta_1, theta_1 + 1) + (1/2)
//! U(theta_2, theta_2 + 1)` under the prior `(theta_1, theta_2) ~ U(A)` with
//! `A = {0 <= theta_1, theta_2 <= 10, |theta_1 - theta_2| > 2}`. The summary
//! is the observation itself with absolute-difference distance. Component-wise
//! updates cannot jump between the two posterior branches, which makes this
//! the standard trap case for Gibbs-like ABC.

use crate::error::{Error, Result};
use crate::model::{BudgetCounter, Dataset, Model, ParamState};
use crate::rng::RngStream;

/// Prior domain bound and separation.
pub const DOMAIN_HI: f64 = 10.0;
pub const SEPARATION: f64 = 2.0;

#[derive(Clone, Debug, Default)]
pub struct MixtureUniformSpec;

#[derive(Clone, Debug, Default)]
pub struct MixtureUniformModel;

impl MixtureUniformModel {
    pub fn new() -> Self {
        Self
    }

    /// One draw from the prior by rejection from the square.
    pub fn prior_sample(rng: &mut RngStream) -> (f64, f64) {
        loop {
            let t1 = rng.uniform_in(0.0, DOMAIN_HI);
            let t2 = rng.uniform_in(0.0, DOMAIN_HI);
            if (t1 - t2).abs() > SEPARATION {
                return (t1, t2);
            }
        }
    }

    /// One observation given the pair.
    pub fn draw_observation(t1: f64, t2: f64, rng: &mut RngStream) -> f64 {
        let base = if rng.uniform() < 0.5 { t1 } else { t2 };
        base + rng.uniform()
    }

    pub fn make_state(t1: f64, t2: f64) -> Result<ParamState> {
        if !(0.0..=DOMAIN_HI).contains(&t1)
            || !(0.0..=DOMAIN_HI).contains(&t2)
            || (t1 - t2).abs() <= SEPARATION
        {
            return Err(Error::InvalidParameter(format!(
                "({t1}, {t2}) outside the constrained prior domain"
            )));
        }
        Ok(ParamState::new(vec![vec![t1], vec![t2]]))
    }

    pub fn observed_dataset(x: f64) -> Dataset {
        vec![vec![x]]
    }
}

impl Model for MixtureUniformModel {
    fn block_count(&self) -> usize {
        2
    }

    fn block_dim(&self, _block: usize) -> usize {
        1
    }

    fn sample_prior(&self, rng: &mut RngStream) -> ParamState {
        let (t1, t2) = Self::prior_sample(rng);
        ParamState::new(vec![vec![t1], vec![t2]])
    }

    fn sample_block_prior(
        &self,
        block: usize,
        state: &ParamState,
        rng: &mut RngStream,
    ) -> Vec<f64> {
        // The conditional prior is uniform over the union of the at most two
        // admissible segments; sample it directly by inverse CDF.
        let other = state.blocks[1 - block][0];
        let left_hi = (other - SEPARATION).clamp(0.0, DOMAIN_HI);
        let right_lo = (other + SEPARATION).clamp(0.0, DOMAIN_HI);
        let left_len = left_hi; // segment [0, left_hi)
        let right_len = DOMAIN_HI - right_lo; // segment (right_lo, 10]
        let total = left_len + right_len;
        debug_assert!(total > 0.0, "conditional support is empty");
        let u = rng.uniform() * total;
        let v = if u < left_len {
            u
        } else {
            right_lo + (u - left_len)
        };
        vec![v]
    }

    fn in_support(&self, state: &ParamState) -> bool {
        let (t1, t2) = (state.blocks[0][0], state.blocks[1][0]);
        (0.0..=DOMAIN_HI).contains(&t1)
            && (0.0..=DOMAIN_HI).contains(&t2)
            && (t1 - t2).abs() > SEPARATION
    }

    fn simulate(
        &self,
        state: &ParamState,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Dataset {
        let x = Self::draw_observation(state.blocks[0][0], state.blocks[1][0], rng);
        budget.book(1, self.sim_cost(state));
        vec![vec![x]]
    }

    fn sim_cost(&self, _state: &ParamState) -> u64 {
        2 // mixture indicator + uniform
    }

    fn block_summary(&self, _block: usize, data: &Dataset, _state: &ParamState) -> Vec<f64> {
        vec![data[0][0]]
    }

    fn block_distance(&self, _block: usize, a: &[f64], b: &[f64]) -> f64 {
        (a[0] - b[0]).abs()
    }

    fn global_summary(&self, data: &Dataset) -> Vec<f64> {
        vec![data[0][0]]
    }

    fn global_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        (a[0] - b[0]).abs()
    }

    fn log_prior_density(&self, state: &ParamState) -> Option<f64> {
        Some(if self.in_support(state) {
            0.0
        } else {
            f64::NEG_INFINITY
        })
    }
}

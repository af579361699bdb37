//! The pluggable contract every benchmark model implements, plus the tolerance
//! and budget machinery shared by all samplers.
//!
//! A model is a collection of parameter blocks. Samplers only ever talk to a
//! model through this trait: conditional prior draws, a pseudo-data simulator,
//! and per-block summary statistics with their distances. Hierarchical models
//! additionally expose their unit/hyper structure through
//! [`HierarchicalModel`], which lets the hierarchical Gibbs sampler simulate
//! only the data a block actually touches.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Pseudo-data carrier: one row per unit / location / series.
pub type Dataset = Vec<Vec<f64>>;

/// Parameter state as ordered blocks of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamState {
    pub blocks: Vec<Vec<f64>>,
}

impl ParamState {
    pub fn new(blocks: Vec<Vec<f64>>) -> Self {
        Self { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self> {
        if dims.iter().sum::<usize>() != flat.len() {
            return Err(Error::Dimension(format!(
                "flat vector of length {} cannot fill blocks of dims {dims:?}",
                flat.len()
            )));
        }
        let mut blocks = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &d in dims {
            blocks.push(flat[off..off + d].to_vec());
            off += d;
        }
        Ok(Self { blocks })
    }
}

/// Per-block acceptance rule.
///
/// `Fixed` is the rejection rule of the plain algorithms; `BestOfN` draws an
/// N-row reference table from the (conditional) prior predictive and keeps the
/// smallest-distance row, which is how the experiments set their tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ToleranceRule {
    Fixed(f64),
    BestOfN(usize),
}

impl ToleranceRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            ToleranceRule::Fixed(eps) if *eps >= 0.0 => Ok(()),
            ToleranceRule::BestOfN(n) if *n >= 1 => Ok(()),
            _ => Err(Error::InvalidParameter(format!("{self:?}"))),
        }
    }
}

/// Ledger of simulator work performed by a run.
///
/// `simulations` counts simulator invocations; `elementary_draws` counts the
/// elementary random variates those invocations consumed (each model declares
/// its own per-call cost). Parameter proposals from (conditional) priors are
/// not booked; pseudo-data generation is.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BudgetCounter {
    pub simulations: u64,
    pub elementary_draws: u64,
}

impl BudgetCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn book(&mut self, simulations: u64, elementary_draws: u64) {
        self.simulations += simulations;
        self.elementary_draws += elementary_draws;
    }

    pub fn merge(&mut self, other: &BudgetCounter) {
        self.simulations += other.simulations;
        self.elementary_draws += other.elementary_draws;
    }
}

/// Total elementary-draw cost of best-N-of-a-table vanilla ABC on the
/// normal-normal hierarchy: `N_V * n * (1 + K)`.
pub fn budget_vanilla(n_v: u64, n: u64, k: u64) -> u64 {
    n_v * n * (1 + k)
}

/// Total elementary-draw cost of `N` hierarchical Gibbs iterations with
/// per-block table size `N_alpha = N_mu`: `N * n * N_alpha * (1 + K)`.
pub fn budget_gibbs(n_iter: u64, n: u64, n_alpha: u64, k: u64) -> u64 {
    n_iter * n * n_alpha * (1 + k)
}

/// Blocked model contract used by every sampler.
pub trait Model {
    fn block_count(&self) -> usize;

    fn block_dim(&self, block: usize) -> usize;

    fn block_name(&self, block: usize) -> String {
        format!("theta{}", block + 1)
    }

    fn param_dim(&self) -> usize {
        (0..self.block_count()).map(|j| self.block_dim(j)).sum()
    }

    /// Full prior draw (chain initialisation, vanilla route, SMC start).
    fn sample_prior(&self, rng: &mut RngStream) -> ParamState;

    /// Conditional prior of one block given the rest of the state.
    fn sample_block_prior(&self, block: usize, state: &ParamState, rng: &mut RngStream)
        -> Vec<f64>;

    /// Whether a full state lies in the prior support (used by SMC moves).
    fn in_support(&self, state: &ParamState) -> bool;

    /// Simulate a full pseudo-dataset; books one simulation plus
    /// [`Model::sim_cost`] elementary draws.
    fn simulate(
        &self,
        state: &ParamState,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Dataset;

    /// Elementary random variates consumed by one [`Model::simulate`] call.
    fn sim_cost(&self, state: &ParamState) -> u64;

    /// Block summary `s_j(x, theta_{-j})`; may read the conditioning state.
    fn block_summary(&self, block: usize, data: &Dataset, state: &ParamState) -> Vec<f64>;

    /// Pseudo-metric on block summaries.
    fn block_distance(&self, block: usize, a: &[f64], b: &[f64]) -> f64;

    /// Summary used by vanilla ABC over the whole dataset.
    fn global_summary(&self, data: &Dataset) -> Vec<f64>;

    fn global_distance(&self, a: &[f64], b: &[f64]) -> f64;

    /// Exact draw from the block's full conditional, where available.
    fn exact_block_conditional(
        &self,
        _block: usize,
        _state: &ParamState,
        _observed: &Dataset,
        _rng: &mut RngStream,
    ) -> Option<Vec<f64>> {
        None
    }

    /// Log prior density up to an additive constant, where available
    /// (negative infinity outside the support). Used by the prior-corrected
    /// SMC move.
    fn log_prior_density(&self, _state: &ParamState) -> Option<f64> {
        None
    }

    /// One prior-predictive row for the vanilla route: a full parameter draw
    /// with its pseudo-dataset. Hierarchical models override this so that the
    /// whole hierarchy below the top-level proposal is booked as simulation
    /// work, matching the budget formulas.
    fn prior_predictive_row(
        &self,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> (ParamState, Dataset) {
        let state = self.sample_prior(rng);
        let data = self.simulate(&state, rng, budget);
        (state, data)
    }
}

/// One hyper parameter and the unit-level blocks it governs.
#[derive(Clone, Debug)]
pub struct HyperGroup {
    pub hyper_block: usize,
    pub unit_blocks: Vec<usize>,
}

/// Update schedule element for the hierarchical Gibbs scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanElement {
    /// Update every unit block of the group against its own unit data.
    Units(usize),
    /// Update the group's hyper block against the current unit parameters.
    Hyper(usize),
    /// Update a shared data-level block via a full-data simulation.
    Shared(usize),
}

/// Two-level hierarchical structure: hyper parameters govern per-unit
/// parameters, each unit owns one row of the dataset.
pub trait HierarchicalModel: Model {
    fn n_units(&self) -> usize;

    fn hyper_groups(&self) -> Vec<HyperGroup>;

    /// Systematic scan order used by the hierarchical sampler.
    fn scan(&self) -> Vec<ScanElement>;

    /// Unit parameter draw from its conditional prior given the group's hyper.
    fn sample_unit_prior(
        &self,
        group: usize,
        unit: usize,
        state: &ParamState,
        rng: &mut RngStream,
    ) -> Vec<f64>;

    /// Hyper draw from its prior.
    fn sample_hyper_prior(&self, group: usize, rng: &mut RngStream) -> Vec<f64>;

    /// Simulate unit `unit`'s data only, reading whatever unit-level blocks
    /// parameterise it from `state`. Books one simulation.
    fn simulate_unit(
        &self,
        unit: usize,
        state: &ParamState,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Vec<f64>;

    /// Summary of one unit's data for the group's unit updates.
    fn unit_summary(&self, group: usize, unit: usize, unit_data: &[f64]) -> Vec<f64>;

    fn unit_distance(&self, group: usize, a: &[f64], b: &[f64]) -> f64;

    /// Pseudo unit-parameter set drawn from the conditional prior at a
    /// candidate hyper value; the hyper level simulates no data. Books one
    /// simulation.
    fn simulate_hyper_pseudo(
        &self,
        group: usize,
        hyper: &[f64],
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Vec<Vec<f64>>;

    /// Summary of the unit parameters seen by the hyper update.
    fn hyper_summary(&self, group: usize, unit_params: &[Vec<f64>]) -> Vec<f64>;

    fn hyper_distance(&self, group: usize, a: &[f64], b: &[f64]) -> f64;

    /// Exact conditional draw of a unit parameter given hyper and unit data,
    /// where the model admits one.
    fn exact_unit_conditional(
        &self,
        _group: usize,
        _unit: usize,
        _state: &ParamState,
        _observed_unit: &[f64],
        _rng: &mut RngStream,
    ) -> Option<Vec<f64>> {
        None
    }

    /// Current unit parameters of a group, as one vector per unit.
    fn unit_params(&self, group: usize, state: &ParamState) -> Vec<Vec<f64>> {
        self.hyper_groups()[group]
            .unit_blocks
            .iter()
            .map(|&b| state.blocks[b].clone())
            .collect()
    }
}

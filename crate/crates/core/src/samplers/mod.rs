//! The five inference algorithms, generic over [`Model`].

mod gibbs;
mod retention;
mod smc;
mod vanilla;

pub use gibbs::{abc_gibbs, gibbs_sweep, hierarchical_abc_gibbs, hierarchical_sweep};
pub use retention::hierarchical_abc_gibbs_retention;
pub use smc::{smc_abc, ParticleSystem, SmcOutput, SmcParams};
pub use vanilla::{vanilla_abc, vanilla_abc_table};

use crate::error::{Error, Result};
use crate::model::{BudgetCounter, Dataset, HierarchicalModel, Model, ParamState, ToleranceRule};
use crate::rng::RngStream;

/// Shared sampler options.
#[derive(Clone, Debug)]
pub struct SamplerOptions {
    /// Attempt guard for `Fixed` rules, whose repeat/until loops would
    /// otherwise have no termination bound.
    pub max_attempts: u64,
    /// Blocks updated through their exact conditional instead of an ABC step.
    pub exact_blocks: Vec<bool>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            max_attempts: 1_000_000,
            exact_blocks: Vec::new(),
        }
    }
}

impl SamplerOptions {
    pub fn exact_for(&self, block: usize) -> bool {
        self.exact_blocks.get(block).copied().unwrap_or(false)
    }

    pub fn all_exact(n_blocks: usize) -> Self {
        Self {
            exact_blocks: vec![true; n_blocks],
            ..Self::default()
        }
    }
}

/// Output of the chain-producing samplers.
#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub samples: Vec<ParamState>,
    /// Accepted distance per step and per block. Exact-conditional updates
    /// record NaN (no distance is defined for them); vanilla runs store one
    /// global distance per draw.
    pub accepted_distances: Vec<Vec<f64>>,
    /// Total acceptance attempts per block (table rows for `BestOfN`).
    pub attempts: Vec<u64>,
    pub budget: BudgetCounter,
}

impl ChainOutput {
    /// Scalar trace of one component of one block.
    pub fn component_trace(&self, block: usize, comp: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.blocks[block][comp]).collect()
    }
}

/// One component-wise ABC update: draw block `block` from the ABC
/// approximation of its full conditional, leaving every other block of
/// `state` untouched. Returns the new block value, the accepted distance and
/// the number of attempts consumed.
///
/// With `exact` set and the model providing an exact conditional for this
/// block, the draw is exact and consumes no simulations.
#[allow(clippy::too_many_arguments)]
pub fn abc_conditional_step<M: Model + ?Sized>(
    model: &M,
    observed: &Dataset,
    block: usize,
    state: &ParamState,
    rule: ToleranceRule,
    exact: bool,
    opts: &SamplerOptions,
    rng: &mut RngStream,
    budget: &mut BudgetCounter,
) -> Result<(Vec<f64>, f64, u64)> {
    if exact {
        if let Some(value) = model.exact_block_conditional(block, state, observed, rng) {
            return Ok((value, f64::NAN, 0));
        }
        return Err(Error::Unsupported(format!(
            "exact conditional for block {block}"
        )));
    }
    rule.validate()?;

    let observed_summary = model.block_summary(block, observed, state);
    let mut candidate = state.clone();

    match rule {
        ToleranceRule::Fixed(eps) => {
            for attempt in 1..=opts.max_attempts {
                candidate.blocks[block] = model.sample_block_prior(block, state, rng);
                let data = model.simulate(&candidate, rng, budget);
                let summary = model.block_summary(block, &data, state);
                let d = model.block_distance(block, &summary, &observed_summary);
                if d < eps {
                    return Ok((candidate.blocks[block].clone(), d, attempt));
                }
            }
            Err(Error::BudgetExceeded {
                block,
                attempts: opts.max_attempts,
            })
        }
        ToleranceRule::BestOfN(n) => {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for _ in 0..n {
                candidate.blocks[block] = model.sample_block_prior(block, state, rng);
                let data = model.simulate(&candidate, rng, budget);
                let summary = model.block_summary(block, &data, state);
                let d = model.block_distance(block, &summary, &observed_summary);
                if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                    best = Some((candidate.blocks[block].clone(), d));
                }
            }
            let (value, d) = best.expect("n >= 1 validated");
            Ok((value, d, n as u64))
        }
    }
}

/// Unit-level update of the hierarchical sampler: propose from the unit's
/// conditional prior, simulate only that unit's data.
#[allow(clippy::too_many_arguments)]
pub fn hier_unit_step<M: HierarchicalModel + ?Sized>(
    model: &M,
    observed: &Dataset,
    group: usize,
    unit: usize,
    state: &ParamState,
    rule: ToleranceRule,
    exact: bool,
    opts: &SamplerOptions,
    rng: &mut RngStream,
    budget: &mut BudgetCounter,
) -> Result<(Vec<f64>, f64, u64)> {
    let unit_block = model.hyper_groups()[group].unit_blocks[unit];
    if exact {
        if let Some(value) = model.exact_unit_conditional(group, unit, state, &observed[unit], rng)
        {
            return Ok((value, f64::NAN, 0));
        }
        return Err(Error::Unsupported(format!(
            "exact unit conditional for group {group}"
        )));
    }
    rule.validate()?;

    let observed_summary = model.unit_summary(group, unit, &observed[unit]);
    let mut candidate = state.clone();

    match rule {
        ToleranceRule::Fixed(eps) => {
            for attempt in 1..=opts.max_attempts {
                candidate.blocks[unit_block] = model.sample_unit_prior(group, unit, state, rng);
                let row = model.simulate_unit(unit, &candidate, rng, budget);
                let summary = model.unit_summary(group, unit, &row);
                let d = model.unit_distance(group, &summary, &observed_summary);
                if d < eps {
                    return Ok((candidate.blocks[unit_block].clone(), d, attempt));
                }
            }
            Err(Error::BudgetExceeded {
                block: unit_block,
                attempts: opts.max_attempts,
            })
        }
        ToleranceRule::BestOfN(n) => {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for _ in 0..n {
                candidate.blocks[unit_block] = model.sample_unit_prior(group, unit, state, rng);
                let row = model.simulate_unit(unit, &candidate, rng, budget);
                let summary = model.unit_summary(group, unit, &row);
                let d = model.unit_distance(group, &summary, &observed_summary);
                if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                    best = Some((candidate.blocks[unit_block].clone(), d));
                }
            }
            let (value, d) = best.expect("n >= 1 validated");
            Ok((value, d, n as u64))
        }
    }
}

/// Hyper-level update: propose from the hyper prior and simulate a pseudo set
/// of unit parameters; no data is simulated.
pub fn hier_hyper_step<M: HierarchicalModel + ?Sized>(
    model: &M,
    group: usize,
    state: &ParamState,
    rule: ToleranceRule,
    opts: &SamplerOptions,
    rng: &mut RngStream,
    budget: &mut BudgetCounter,
) -> Result<(Vec<f64>, f64, u64)> {
    rule.validate()?;
    let current_summary = model.hyper_summary(group, &model.unit_params(group, state));

    match rule {
        ToleranceRule::Fixed(eps) => {
            for attempt in 1..=opts.max_attempts {
                let hyper = model.sample_hyper_prior(group, rng);
                let pseudo = model.simulate_hyper_pseudo(group, &hyper, rng, budget);
                let summary = model.hyper_summary(group, &pseudo);
                let d = model.hyper_distance(group, &summary, &current_summary);
                if d < eps {
                    return Ok((hyper, d, attempt));
                }
            }
            Err(Error::BudgetExceeded {
                block: model.hyper_groups()[group].hyper_block,
                attempts: opts.max_attempts,
            })
        }
        ToleranceRule::BestOfN(n) => {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for _ in 0..n {
                let hyper = model.sample_hyper_prior(group, rng);
                let pseudo = model.simulate_hyper_pseudo(group, &hyper, rng, budget);
                let summary = model.hyper_summary(group, &pseudo);
                let d = model.hyper_distance(group, &summary, &current_summary);
                if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                    best = Some((hyper, d));
                }
            }
            let (value, d) = best.expect("n >= 1 validated");
            Ok((value, d, n as u64))
        }
    }
}

//! Component-wise ABC with Gibbs-like steps.

use crate::error::{Error, Result};
use crate::model::{
    BudgetCounter, Dataset, HierarchicalModel, Model, ParamState, ScanElement, ToleranceRule,
};
use crate::rng::RngStream;

use super::{abc_conditional_step, hier_hyper_step, hier_unit_step, ChainOutput, SamplerOptions};

fn check_rules<M: Model + ?Sized>(model: &M, rules: &[ToleranceRule]) -> Result<()> {
    if rules.len() != model.block_count() {
        return Err(Error::Dimension(format!(
            "{} rules for {} blocks",
            rules.len(),
            model.block_count()
        )));
    }
    for r in rules {
        r.validate()?;
    }
    Ok(())
}

/// One systematic-scan sweep over all blocks, in place. The update of block j
/// reads blocks < j at the current iteration and blocks > j at the previous
/// one, which in-place mutation realises directly.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_sweep<M: Model + ?Sized>(
    model: &M,
    observed: &Dataset,
    state: &mut ParamState,
    rules: &[ToleranceRule],
    opts: &SamplerOptions,
    rng: &mut RngStream,
    budget: &mut BudgetCounter,
    distances: &mut Vec<f64>,
    attempts: &mut [u64],
) -> Result<()> {
    for block in 0..model.block_count() {
        let (value, d, tries) = abc_conditional_step(
            model,
            observed,
            block,
            state,
            rules[block],
            opts.exact_for(block),
            opts,
            rng,
            budget,
        )?;
        state.blocks[block] = value;
        distances.push(d);
        attempts[block] += tries;
    }
    Ok(())
}

/// Generic component-wise sampler: `n_iter` systematic scans from `init`,
/// each block updated through [`abc_conditional_step`] with its own rule.
pub fn abc_gibbs<M: Model + ?Sized>(
    model: &M,
    observed: &Dataset,
    n_iter: usize,
    rules: &[ToleranceRule],
    init: ParamState,
    opts: &SamplerOptions,
    rng: &mut RngStream,
) -> Result<ChainOutput> {
    check_rules(model, rules)?;
    let mut state = init;
    let mut budget = BudgetCounter::new();
    let mut samples = Vec::with_capacity(n_iter);
    let mut accepted_distances = Vec::with_capacity(n_iter);
    let mut attempts = vec![0u64; model.block_count()];

    for _ in 0..n_iter {
        let mut step_distances = Vec::with_capacity(model.block_count());
        gibbs_sweep(
            model,
            observed,
            &mut state,
            rules,
            opts,
            rng,
            &mut budget,
            &mut step_distances,
            &mut attempts,
        )?;
        samples.push(state.clone());
        accepted_distances.push(step_distances);
    }

    Ok(ChainOutput {
        samples,
        accepted_distances,
        attempts,
        budget,
    })
}

/// One sweep of the hierarchical scan, in place. Unit updates simulate only
/// their own unit's data; hyper updates simulate pseudo unit-parameters and no
/// data; shared blocks fall back to the generic full-data step.
#[allow(clippy::too_many_arguments)]
pub fn hierarchical_sweep<M: HierarchicalModel + ?Sized>(
    model: &M,
    observed: &Dataset,
    state: &mut ParamState,
    rules: &[ToleranceRule],
    opts: &SamplerOptions,
    rng: &mut RngStream,
    budget: &mut BudgetCounter,
    distances: &mut Vec<f64>,
    attempts: &mut [u64],
) -> Result<()> {
    let groups = model.hyper_groups();
    for element in model.scan() {
        match element {
            ScanElement::Units(group) => {
                for unit in 0..groups[group].unit_blocks.len() {
                    let block = groups[group].unit_blocks[unit];
                    let (value, d, tries) = hier_unit_step(
                        model,
                        observed,
                        group,
                        unit,
                        state,
                        rules[block],
                        opts.exact_for(block),
                        opts,
                        rng,
                        budget,
                    )?;
                    state.blocks[block] = value;
                    distances.push(d);
                    attempts[block] += tries;
                }
            }
            ScanElement::Hyper(group) => {
                let block = groups[group].hyper_block;
                let (value, d, tries) = if opts.exact_for(block) {
                    match model.exact_block_conditional(block, state, observed, rng) {
                        Some(v) => (v, f64::NAN, 0),
                        None => {
                            return Err(Error::Unsupported(format!(
                                "exact conditional for hyper block {block}"
                            )))
                        }
                    }
                } else {
                    hier_hyper_step(model, group, state, rules[block], opts, rng, budget)?
                };
                state.blocks[block] = value;
                distances.push(d);
                attempts[block] += tries;
            }
            ScanElement::Shared(block) => {
                let (value, d, tries) = abc_conditional_step(
                    model,
                    observed,
                    block,
                    state,
                    rules[block],
                    opts.exact_for(block),
                    opts,
                    rng,
                    budget,
                )?;
                state.blocks[block] = value;
                distances.push(d);
                attempts[block] += tries;
            }
        }
    }
    Ok(())
}

/// Hierarchical component-wise sampler: per iteration each unit parameter is
/// updated against its own unit data with the group hyper as conditioning, and
/// each hyper is updated against the current unit parameters through a
/// data-free pseudo simulation.
pub fn hierarchical_abc_gibbs<M: HierarchicalModel + ?Sized>(
    model: &M,
    observed: &Dataset,
    n_iter: usize,
    rules: &[ToleranceRule],
    init: ParamState,
    opts: &SamplerOptions,
    rng: &mut RngStream,
) -> Result<ChainOutput> {
    check_rules(model, rules)?;
    if observed.len() < model.n_units() {
        return Err(Error::Dimension(format!(
            "{} observed rows for {} units",
            observed.len(),
            model.n_units()
        )));
    }
    let mut state = init;
    let mut budget = BudgetCounter::new();
    let mut samples = Vec::with_capacity(n_iter);
    let mut accepted_distances = Vec::with_capacity(n_iter);
    let mut attempts = vec![0u64; model.block_count()];

    for _ in 0..n_iter {
        let mut step_distances = Vec::new();
        hierarchical_sweep(
            model,
            observed,
            &mut state,
            rules,
            opts,
            rng,
            &mut budget,
            &mut step_distances,
            &mut attempts,
        )?;
        samples.push(state.clone());
        accepted_distances.push(step_distances);
    }

    Ok(ChainOutput {
        samples,
        accepted_distances,
        attempts,
        budget,
    })
}

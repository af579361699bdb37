//! Benchmark models, each packaged as a [`crate::model::Model`] together with
//! its analytic helpers and (where one exists) an exact-posterior oracle.

pub mod gk;
pub mod heat;
pub mod ma2;
pub mod mixture;
pub mod normal_normal;

pub use gk::{GkModel, GkSpec};
pub use heat::{HeatEqSpec, HeatModel};
pub use ma2::{Ma2HierModel, Ma2HierSpec};
pub use mixture::MixtureUniformModel;
pub use normal_normal::{NormalNormalModel, NormalNormalSpec};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BudgetCounter, Model};
    use crate::rng::RngStream;

    fn check_block_distances(model: &dyn Model, rng: &mut RngStream) {
        let mut budget = BudgetCounter::new();
        for _ in 0..20 {
            let state = model.sample_prior(rng);
            let x = model.simulate(&state, rng, &mut budget);
            let y = model.simulate(&state, rng, &mut budget);
            for block in 0..model.block_count() {
                let a = model.block_summary(block, &x, &state);
                let b = model.block_summary(block, &y, &state);
                assert_eq!(model.block_distance(block, &a, &a), 0.0);
                let ab = model.block_distance(block, &a, &b);
                let ba = model.block_distance(block, &b, &a);
                assert!(ab >= 0.0);
                assert_eq!(ab, ba, "asymmetric distance on block {block}");
            }
            let ga = model.global_summary(&x);
            let gb = model.global_summary(&y);
            assert_eq!(model.global_distance(&ga, &ga), 0.0);
            assert_eq!(model.global_distance(&ga, &gb), model.global_distance(&gb, &ga));
        }
    }

    #[test]
    fn block_distances_are_pseudo_metrics_across_models() {
        let mut rng = RngStream::new(77, 0);
        check_block_distances(
            &NormalNormalModel::new(NormalNormalSpec::new(3, 4, 1.0, 1.0).unwrap()),
            &mut rng,
        );
        check_block_distances(
            &GkModel::new(GkSpec::doubly_hierarchical(3, 20).unwrap()),
            &mut rng,
        );
        check_block_distances(&Ma2HierModel::new(Ma2HierSpec::new(2, 30).unwrap()), &mut rng);
        check_block_distances(
            &HeatModel::new(HeatEqSpec::with_options(6, 0.1, 4, None, 0.1).unwrap()),
            &mut rng,
        );
        check_block_distances(&MixtureUniformModel::new(), &mut rng);
    }
}

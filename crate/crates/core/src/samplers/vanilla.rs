//! Vanilla rejection ABC.

use crate::error::{Error, Result};
use crate::model::{BudgetCounter, Dataset, Model, ParamState, ToleranceRule};
use crate::rng::RngStream;

use super::{ChainOutput, SamplerOptions};

/// `n` independent approximate posterior draws.
///
/// `Fixed(eps)` repeats prior-predictive draws until the summary distance
/// falls below `eps`; `BestOfN(m)` draws a fresh m-row reference table per
/// output draw and keeps its argmin-distance parameter.
pub fn vanilla_abc<M: Model + ?Sized>(
    model: &M,
    observed: &Dataset,
    n: usize,
    rule: ToleranceRule,
    opts: &SamplerOptions,
    rng: &mut RngStream,
) -> Result<ChainOutput> {
    rule.validate()?;
    let observed_summary = model.global_summary(observed);
    let mut budget = BudgetCounter::new();
    let mut samples = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    let mut attempts = 0u64;

    for _ in 0..n {
        match rule {
            ToleranceRule::Fixed(eps) => {
                let mut accepted = false;
                for attempt in 1..=opts.max_attempts {
                    let (state, data) = model.prior_predictive_row(rng, &mut budget);
                    let d = model.global_distance(&model.global_summary(&data), &observed_summary);
                    if d < eps {
                        samples.push(state);
                        distances.push(vec![d]);
                        attempts += attempt;
                        accepted = true;
                        break;
                    }
                }
                if !accepted {
                    return Err(Error::BudgetExceeded {
                        block: 0,
                        attempts: opts.max_attempts,
                    });
                }
            }
            ToleranceRule::BestOfN(m) => {
                let mut best: Option<(ParamState, f64)> = None;
                for _ in 0..m {
                    let (state, data) = model.prior_predictive_row(rng, &mut budget);
                    let d = model.global_distance(&model.global_summary(&data), &observed_summary);
                    if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                        best = Some((state, d));
                    }
                }
                let (state, d) = best.expect("m >= 1 validated");
                samples.push(state);
                distances.push(vec![d]);
                attempts += m as u64;
            }
        }
    }

    Ok(ChainOutput {
        samples,
        accepted_distances: distances,
        attempts: vec![attempts],
        budget,
    })
}

/// Reference-table vanilla ABC: draw one table of `table_size` prior
/// predictive rows and keep the `keep` smallest-distance parameters. This is
/// the quantile-tolerance variant used for budget-matched comparisons, where
/// keeping the best N of N_V rows costs exactly one table.
pub fn vanilla_abc_table<M: Model + ?Sized>(
    model: &M,
    observed: &Dataset,
    table_size: usize,
    keep: usize,
    rng: &mut RngStream,
) -> Result<ChainOutput> {
    if keep == 0 || keep > table_size {
        return Err(Error::InvalidParameter(format!(
            "keep = {keep} must lie in 1..=table_size = {table_size}"
        )));
    }
    let observed_summary = model.global_summary(observed);
    let mut budget = BudgetCounter::new();

    // Bounded selection: a max-heap of the current best `keep` rows keeps
    // memory at O(keep) and insertion logarithmic while streaming the table.
    struct Row(f64, ParamState);
    impl PartialEq for Row {
        fn eq(&self, other: &Self) -> bool {
            self.0 == other.0
        }
    }
    impl Eq for Row {}
    impl PartialOrd for Row {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Row {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }

    let mut kept = std::collections::BinaryHeap::with_capacity(keep + 1);
    for _ in 0..table_size {
        let (state, data) = model.prior_predictive_row(rng, &mut budget);
        let d = model.global_distance(&model.global_summary(&data), &observed_summary);
        if kept.len() < keep {
            kept.push(Row(d, state));
        } else if d < kept.peek().expect("non-empty").0 {
            kept.push(Row(d, state));
            kept.pop();
        }
    }

    let sorted = kept.into_sorted_vec();
    let mut samples = Vec::with_capacity(keep);
    let mut distances = Vec::with_capacity(keep);
    for Row(d, state) in sorted {
        samples.push(state);
        distances.push(vec![d]);
    }
    Ok(ChainOutput {
        samples,
        accepted_distances: distances,
        attempts: vec![table_size as u64],
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::normal_normal::{NormalNormalModel, NormalNormalSpec};
    use crate::stats::ks_statistic;

    fn nn(n: usize, k: usize) -> NormalNormalModel {
        NormalNormalModel::new(NormalNormalSpec::new(n, k, 1.0, 1.0).unwrap())
    }

    #[test]
    fn fixed_infinite_tolerance_returns_prior() {
        // eps = infinity accepts everything, so alpha draws are U[-4, 4]:
        // KS distance against direct prior draws below 0.03 at 1e4 draws.
        let model = nn(3, 2);
        let mut rng = RngStream::new(1, 0);
        let (_, observed) = model.generate_truth(Some(0.0), &mut rng);
        let out = vanilla_abc(
            &model,
            &observed,
            10_000,
            ToleranceRule::Fixed(f64::INFINITY),
            &SamplerOptions::default(),
            &mut rng,
        )
        .unwrap();
        let alphas = out.component_trace(0, 0);
        let mut prior_rng = RngStream::new(1, 99);
        let prior: Vec<f64> = (0..10_000)
            .map(|_| prior_rng.uniform_in(-4.0, 4.0))
            .collect();
        let ks = ks_statistic(&alphas, &prior).unwrap();
        assert!(ks < 0.03, "KS = {ks}");
    }

    #[test]
    fn best_of_one_equals_unconditional_draw() {
        // BestOfN(1) is a single unconditional prior-predictive draw, hence
        // distributed like Fixed(infinity) output.
        let model = nn(2, 2);
        let mut rng = RngStream::new(2, 0);
        let (_, observed) = model.generate_truth(Some(0.5), &mut rng);
        let a = vanilla_abc(
            &model,
            &observed,
            8000,
            ToleranceRule::BestOfN(1),
            &SamplerOptions::default(),
            &mut RngStream::new(2, 1),
        )
        .unwrap();
        let b = vanilla_abc(
            &model,
            &observed,
            8000,
            ToleranceRule::Fixed(f64::INFINITY),
            &SamplerOptions::default(),
            &mut RngStream::new(2, 2),
        )
        .unwrap();
        let ks = ks_statistic(&a.component_trace(0, 0), &b.component_trace(0, 0)).unwrap();
        assert!(ks < 0.03, "KS = {ks}");
        // Exactly one simulation per output draw.
        assert_eq!(a.budget.simulations, 8000);
    }

    #[test]
    fn best_of_n_budget_exact() {
        let model = nn(4, 3);
        let mut rng = RngStream::new(3, 0);
        let (_, observed) = model.generate_truth(None, &mut rng);
        let out = vanilla_abc(
            &model,
            &observed,
            50,
            ToleranceRule::BestOfN(20),
            &SamplerOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.budget.simulations, 50 * 20);
        // n + nK elementary draws per row.
        assert_eq!(out.budget.elementary_draws, 50 * 20 * (4 + 4 * 3));
        assert_eq!(out.samples.len(), 50);
    }

    #[test]
    fn table_variant_keeps_best_rows_sorted() {
        let model = nn(2, 4);
        let mut rng = RngStream::new(4, 0);
        let (_, observed) = model.generate_truth(None, &mut rng);
        let out = vanilla_abc_table(&model, &observed, 500, 40, &mut rng).unwrap();
        assert_eq!(out.samples.len(), 40);
        assert_eq!(out.budget.simulations, 500);
        let ds: Vec<f64> = out.accepted_distances.iter().map(|v| v[0]).collect();
        assert!(ds.windows(2).all(|w| w[0] <= w[1]));

        // Same table size, keep everything: the kept distances are the 40
        // smallest of the full table.
        let full =
            vanilla_abc_table(&model, &observed, 500, 500, &mut RngStream::new(4, 1)).unwrap();
        let mut all: Vec<f64> = full.accepted_distances.iter().map(|v| v[0]).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rerun =
            vanilla_abc_table(&model, &observed, 500, 40, &mut RngStream::new(4, 1)).unwrap();
        let rerun_ds: Vec<f64> = rerun.accepted_distances.iter().map(|v| v[0]).collect();
        for (a, b) in rerun_ds.iter().zip(all.iter().take(40)) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn table_variant_validates_keep() {
        let model = nn(1, 1);
        let mut rng = RngStream::new(5, 0);
        let (_, observed) = model.generate_truth(None, &mut rng);
        assert!(vanilla_abc_table(&model, &observed, 10, 0, &mut rng).is_err());
        assert!(vanilla_abc_table(&model, &observed, 10, 11, &mut rng).is_err());
    }

    #[test]
    fn fixed_rule_attempt_guard_trips() {
        let model = nn(1, 1);
        let mut rng = RngStream::new(6, 0);
        let (_, observed) = model.generate_truth(None, &mut rng);
        let opts = SamplerOptions {
            max_attempts: 50,
            ..Default::default()
        };
        let err = vanilla_abc(
            &model,
            &observed,
            1,
            ToleranceRule::Fixed(0.0),
            &opts,
            &mut rng,
        );
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }
}

//! Experiment execution: seeded replicates, per-sampler diagnostics, budget
//! checks and artifact emission. Deterministic given (config, seed): every
//! replicate runs on a pre-split stream, so the worker count never changes
//! results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use serde::Serialize;

use abcg::diagnostics::{
    contraction_probe, contraction_probe_hyper, posterior_predictive_distance,
    wasserstein1_to_grid, OraclePosterior, PredictiveDistance, ProbeResult,
};
use abcg::model::{budget_gibbs, budget_vanilla, ParamState, ToleranceRule};
use abcg::models::normal_normal::nn_exact_posterior_oracle;
use abcg::samplers::{
    abc_gibbs, hierarchical_abc_gibbs, hierarchical_abc_gibbs_retention, smc_abc, vanilla_abc,
    vanilla_abc_table, SamplerOptions, SmcParams,
};
use abcg::{BudgetCounter, RngStream};

use crate::build::{build_experiment, BuiltExperiment, BuiltModel};
use crate::config::{ExperimentConfig, ModelConfig, ProbeTarget, SamplerConfig};
use crate::output::{density_csv, emit_density, samples_csv, write_text};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    /// Retain every replicate's samples in the in-memory summary (test use;
    /// never serialized).
    pub keep_samples: bool,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub model: String,
    pub seed: u64,
    pub replicates: usize,
    pub burn_in: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub data_warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_check: Option<BudgetCheck>,
    pub samplers: Vec<SamplerSummary>,
}

#[derive(Debug, Serialize)]
pub struct BudgetCheck {
    /// Elementary-draw (normal-normal) or simulation (heat) budgets from the
    /// analytic formulas.
    pub analytic_gibbs: u64,
    pub analytic_vanilla: u64,
    /// Cost of one Gibbs iteration in the same unit; the allowed slack.
    pub iteration_cost: u64,
}

#[derive(Debug, Serialize)]
pub struct SamplerSummary {
    pub label: String,
    /// Wall-clock seconds summed over replicate tasks. Excluded from the JSON
    /// so that reruns are byte-identical; reported on stdout instead.
    #[serde(skip)]
    pub elapsed_secs: f64,
    pub replicates: Vec<ReplicateSummary>,
}

#[derive(Debug, Serialize)]
pub struct ReplicateSummary {
    pub simulations: u64,
    pub elementary_draws: u64,
    pub retained_samples: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub w1_to_oracle: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictive_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictive_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smc: Option<SmcInfo>,
    /// Populated only under [`RunOptions::keep_samples`].
    #[serde(skip)]
    pub samples: Vec<ParamState>,
}

impl ReplicateSummary {
    /// Scalar trace of one block (requires `keep_samples`).
    pub fn trace(&self, block: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.blocks[block][0]).collect()
    }
}

#[derive(Debug, Serialize)]
pub struct SmcInfo {
    pub final_epsilon: f64,
    pub stalled_moves: u64,
    pub resample_events: usize,
}

struct ReplicateRun {
    samples: Vec<ParamState>,
    budget: BudgetCounter,
    smc: Option<SmcInfo>,
    elapsed_secs: f64,
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let seed = opts.seed.unwrap_or(config.seed);
    let replicates = opts.replicates.unwrap_or(config.replicates);
    let built = build_experiment(config, seed)?;

    let oracle = if config.diagnostics.oracle_blocks.is_empty() {
        None
    } else {
        Some(compute_oracle(config, &built)?)
    };
    let budget_check = if config.budget_matched {
        Some(check_budgets(config, &built)?)
    } else {
        None
    };

    // One task per (sampler, replicate) on a pre-split stream.
    let tasks: Vec<(usize, usize)> = (0..config.samplers.len())
        .flat_map(|s| (0..replicates).map(move |r| (s, r)))
        .collect();
    let root = RngStream::new(seed, 1);
    let results: Vec<Result<ReplicateRun>> = tasks
        .par_iter()
        .map(|&(s, r)| {
            let rng = root.substream((s as u64) * 1_000_000 + r as u64);
            run_sampler_once(&built, &config.samplers[s], config.burn_in, rng)
        })
        .collect();

    let mut by_sampler: Vec<Vec<ReplicateRun>> = Vec::with_capacity(config.samplers.len());
    let mut iter = results.into_iter();
    for _ in 0..config.samplers.len() {
        let mut runs = Vec::with_capacity(replicates);
        for _ in 0..replicates {
            runs.push(iter.next().expect("task list covers the grid")?);
        }
        by_sampler.push(runs);
    }

    let mut samplers = Vec::with_capacity(config.samplers.len());
    for (s, (scfg, runs)) in config
        .samplers
        .iter()
        .zip(by_sampler)
        .enumerate()
    {
        let label = scfg.label();
        let mut elapsed = 0.0;
        let mut reps = Vec::with_capacity(runs.len());
        for (r, run) in runs.into_iter().enumerate() {
            elapsed += run.elapsed_secs;

            let mut w1 = BTreeMap::new();
            if let Some(oracle) = &oracle {
                for name in &config.diagnostics.oracle_blocks {
                    let block = built.model.block_index(name)?;
                    let trace: Vec<f64> =
                        run.samples.iter().map(|st| st.blocks[block][0]).collect();
                    let grid = oracle_grid(oracle, name, block)?;
                    w1.insert(name.clone(), wasserstein1_to_grid(&trace, grid)?);
                }
            }

            let (predictive_mean, predictive_se) = if config.diagnostics.predictive_reps > 0 {
                let chain = abcg::samplers::ChainOutput {
                    samples: run.samples.clone(),
                    accepted_distances: vec![],
                    attempts: vec![],
                    budget: run.budget,
                };
                let rng = RngStream::new(seed, 2).substream((s as u64) * 1_000_000 + r as u64);
                let score = posterior_predictive_distance(
                    built.model.as_model(),
                    &built.observed,
                    &chain,
                    PredictiveDistance::Global,
                    config.diagnostics.predictive_reps,
                    &rng,
                )?;
                (Some(score.mean), Some(score.se))
            } else {
                (None, None)
            };

            if let Some(dir) = &opts.out_dir {
                write_replicate_files(config, &built, dir, &label, r, &run.samples)?;
            }

            if let Some(check) = &budget_check {
                verify_ledger(config, scfg, check, &run.budget)?;
            }

            reps.push(ReplicateSummary {
                simulations: run.budget.simulations,
                elementary_draws: run.budget.elementary_draws,
                retained_samples: run.samples.len(),
                w1_to_oracle: w1,
                predictive_mean,
                predictive_se,
                smc: run.smc,
                samples: if opts.keep_samples {
                    run.samples
                } else {
                    Vec::new()
                },
            });
        }
        samplers.push(SamplerSummary {
            label,
            elapsed_secs: elapsed,
            replicates: reps,
        });
    }

    let summary = RunSummary {
        experiment: config.name.clone(),
        model: config.model.kind_name().to_string(),
        seed,
        replicates,
        burn_in: config.burn_in,
        data_warnings: built.data_warnings.clone(),
        budget_check,
        samplers,
    };

    if let Some(dir) = &opts.out_dir {
        let json = serde_json::to_string_pretty(&summary)?;
        write_text(&dir.join("summary.json"), &(json + "\n"))?;
    }
    Ok(summary)
}

fn run_sampler_once(
    built: &BuiltExperiment,
    scfg: &SamplerConfig,
    burn_in: usize,
    mut rng: RngStream,
) -> Result<ReplicateRun> {
    let model = built.model.as_model();
    let observed = &built.observed;
    let start = Instant::now();

    let (samples, budget, smc_info) = match scfg {
        SamplerConfig::Vanilla {
            n,
            rule,
            max_attempts,
            ..
        } => {
            let opts = SamplerOptions {
                max_attempts: *max_attempts,
                ..Default::default()
            };
            let out = vanilla_abc(model, observed, *n, rule.to_rule(), &opts, &mut rng)
                .map_err(|e| anyhow!("vanilla: {e}"))?;
            (out.samples, out.budget, None)
        }
        SamplerConfig::VanillaTable {
            table_size, keep, ..
        } => {
            let out = vanilla_abc_table(model, observed, *table_size, *keep, &mut rng)
                .map_err(|e| anyhow!("vanilla-table: {e}"))?;
            (out.samples, out.budget, None)
        }
        SamplerConfig::AbcGibbs {
            iterations,
            rule,
            exact,
            init,
            max_attempts,
            ..
        } => {
            if *iterations <= burn_in {
                bail!("iterations must exceed the burn-in of {burn_in}");
            }
            let rules = vec![rule.to_rule(); model.block_count()];
            let opts = SamplerOptions {
                max_attempts: *max_attempts,
                exact_blocks: vec![*exact; model.block_count()],
            };
            let init = match init {
                Some(blocks) => {
                    let state = ParamState::new(blocks.clone());
                    if !model.in_support(&state) {
                        bail!("configured init lies outside the prior support");
                    }
                    state
                }
                None => model.sample_prior(&mut rng),
            };
            let out = abc_gibbs(model, observed, *iterations, &rules, init, &opts, &mut rng)
                .map_err(|e| anyhow!("abc-gibbs: {e}"))?;
            (out.samples[burn_in..].to_vec(), out.budget, None)
        }
        SamplerConfig::Hierarchical {
            iterations,
            unit_tables,
            hyper_tables,
            shared_table,
            exact_units,
            ..
        } => {
            if *iterations <= burn_in {
                bail!("iterations must exceed the burn-in of {burn_in}");
            }
            let hier = built
                .model
                .as_hierarchical()
                .ok_or_else(|| anyhow!("model has no hierarchical structure"))?;
            let groups = hier.hyper_groups();
            if unit_tables.len() != groups.len() || hyper_tables.len() != groups.len() {
                bail!(
                    "unit_tables/hyper_tables must list {} group entries",
                    groups.len()
                );
            }
            let mut rules = vec![ToleranceRule::BestOfN(1); hier.block_count()];
            let mut exact_blocks = vec![false; hier.block_count()];
            for (g, group) in groups.iter().enumerate() {
                rules[group.hyper_block] = ToleranceRule::BestOfN(hyper_tables[g]);
                for &b in &group.unit_blocks {
                    rules[b] = ToleranceRule::BestOfN(unit_tables[g]);
                    exact_blocks[b] = *exact_units;
                }
            }
            if let Some(shared) = shared_table {
                for element in hier.scan() {
                    if let abcg::model::ScanElement::Shared(b) = element {
                        rules[b] = ToleranceRule::BestOfN(*shared);
                    }
                }
            }
            let opts = SamplerOptions {
                exact_blocks,
                ..Default::default()
            };
            let init = hier.sample_prior(&mut rng);
            let out =
                hierarchical_abc_gibbs(hier, observed, *iterations, &rules, init, &opts, &mut rng)
                    .map_err(|e| anyhow!("hierarchical: {e}"))?;
            (out.samples[burn_in..].to_vec(), out.budget, None)
        }
        SamplerConfig::Retention {
            iterations,
            eps_alpha,
            ..
        } => {
            if *iterations <= burn_in {
                bail!("iterations must exceed the burn-in of {burn_in}");
            }
            let hier = built
                .model
                .as_hierarchical()
                .ok_or_else(|| anyhow!("model has no hierarchical structure"))?;
            let out =
                hierarchical_abc_gibbs_retention(hier, observed, *iterations, *eps_alpha, &mut rng)
                    .map_err(|e| anyhow!("retention: {e}"))?;
            (out.samples[burn_in..].to_vec(), out.budget, None)
        }
        SamplerConfig::Smc {
            particles,
            steps,
            m,
            alpha_quality,
            n_min,
            move_cap,
            prior_corrected,
            ..
        } => {
            let params = SmcParams {
                n_particles: *particles,
                m_pseudo: *m,
                t_steps: *steps,
                alpha_quality: *alpha_quality,
                n_min: n_min.unwrap_or(particles / 2),
                move_cap: *move_cap,
                prior_corrected_moves: *prior_corrected,
            };
            let out =
                smc_abc(model, observed, &params, &mut rng).map_err(|e| anyhow!("smc: {e}"))?;
            let final_sys = out.final_system();
            // Unweighted representation of the final population.
            let mut resample_rng = rng.substream(0xF1AA);
            let samples: Vec<ParamState> = (0..final_sys.particles.len())
                .map(|_| {
                    let u = resample_rng.uniform();
                    let mut acc = 0.0;
                    let mut idx = final_sys.particles.len() - 1;
                    for (i, &w) in final_sys.weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            idx = i;
                            break;
                        }
                    }
                    final_sys.particles[idx].clone()
                })
                .collect();
            let info = SmcInfo {
                final_epsilon: final_sys.epsilon,
                stalled_moves: out.stalled_moves,
                resample_events: out.trajectory.iter().filter(|s| s.resampled).count(),
            };
            (samples, out.budget, Some(info))
        }
    };

    Ok(ReplicateRun {
        samples,
        budget,
        smc: smc_info,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn compute_oracle(config: &ExperimentConfig, built: &BuiltExperiment) -> Result<OraclePosterior> {
    match (&config.model, &built.model) {
        (ModelConfig::NormalNormal { .. }, BuiltModel::NormalNormal(m)) => {
            nn_exact_posterior_oracle(&m.spec, &built.observed, config.diagnostics.oracle_grid)
                .map_err(|e| anyhow!("oracle: {e}"))
        }
        _ => bail!("exact-posterior oracle exists only for the normal-normal model"),
    }
}

fn oracle_grid<'a>(
    oracle: &'a OraclePosterior,
    name: &str,
    block: usize,
) -> Result<&'a abcg::diagnostics::DensityGrid> {
    if name == "alpha" {
        Ok(&oracle.alpha)
    } else if block >= 1 && block - 1 < oracle.mus.len() {
        Ok(&oracle.mus[block - 1])
    } else {
        bail!("no oracle grid for block {name}")
    }
}

/// Analytic budget agreement for matched configurations, before running.
fn check_budgets(config: &ExperimentConfig, _built: &BuiltExperiment) -> Result<BudgetCheck> {
    match &config.model {
        ModelConfig::NormalNormal { n, k, .. } => {
            let (n, k) = (*n as u64, *k as u64);
            let hier = config.samplers.iter().find_map(|s| match s {
                SamplerConfig::Hierarchical {
                    iterations,
                    unit_tables,
                    hyper_tables,
                    ..
                } => Some((
                    *iterations as u64,
                    unit_tables.clone(),
                    hyper_tables.clone(),
                )),
                _ => None,
            });
            let table = config.samplers.iter().find_map(|s| match s {
                SamplerConfig::VanillaTable { table_size, .. } => Some(*table_size as u64),
                _ => None,
            });
            let ((iters, units, hypers), table_size) = match (hier, table) {
                (Some(h), Some(t)) => (h, t),
                _ => bail!("matched mode needs a hierarchical and a vanilla-table sampler"),
            };
            if units[0] != hypers[0] {
                bail!("matched mode assumes equal unit and hyper table sizes");
            }
            let n_alpha = units[0] as u64;
            let analytic_gibbs = budget_gibbs(iters, n, n_alpha, k);
            let analytic_vanilla = budget_vanilla(table_size, n, k);
            let iteration_cost = n * n_alpha * (1 + k);
            if analytic_gibbs.abs_diff(analytic_vanilla) > iteration_cost {
                bail!(
                    "budget mismatch: gibbs {analytic_gibbs} vs vanilla {analytic_vanilla} \
                     exceeds one iteration ({iteration_cost})"
                );
            }
            Ok(BudgetCheck {
                analytic_gibbs,
                analytic_vanilla,
                iteration_cost,
            })
        }
        ModelConfig::Heat { n, .. } => {
            let gibbs = config.samplers.iter().find_map(|s| match s {
                SamplerConfig::AbcGibbs {
                    iterations,
                    rule: crate::config::RuleConfig::BestOf { best_of },
                    ..
                } => Some((*iterations as u64, *n as u64 * *best_of as u64)),
                _ => None,
            });
            let table = config.samplers.iter().find_map(|s| match s {
                SamplerConfig::VanillaTable { table_size, .. } => Some(*table_size as u64),
                _ => None,
            });
            let ((iterations, per_iteration), analytic_vanilla) = match (gibbs, table) {
                (Some(g), Some(t)) => (g, t),
                _ => bail!("matched heat mode needs abc-gibbs (best-of) and vanilla-table"),
            };
            let analytic_gibbs = iterations * per_iteration;
            if analytic_gibbs.abs_diff(analytic_vanilla) > per_iteration.max(1) {
                bail!(
                    "budget mismatch: gibbs {analytic_gibbs} vs vanilla {analytic_vanilla} \
                     simulations"
                );
            }
            Ok(BudgetCheck {
                analytic_gibbs,
                analytic_vanilla,
                iteration_cost: per_iteration,
            })
        }
        _ => bail!("budget_matched checks are defined for normal-normal and heat runs"),
    }
}

/// Post-run assertion that the ledger reproduced the analytic formula.
fn verify_ledger(
    config: &ExperimentConfig,
    scfg: &SamplerConfig,
    check: &BudgetCheck,
    budget: &BudgetCounter,
) -> Result<()> {
    match (&config.model, scfg) {
        (ModelConfig::NormalNormal { .. }, SamplerConfig::Hierarchical { .. }) => {
            if budget.elementary_draws != check.analytic_gibbs {
                bail!(
                    "gibbs ledger {} != analytic {}",
                    budget.elementary_draws,
                    check.analytic_gibbs
                );
            }
        }
        (ModelConfig::NormalNormal { .. }, SamplerConfig::VanillaTable { .. }) => {
            if budget.elementary_draws != check.analytic_vanilla {
                bail!(
                    "vanilla ledger {} != analytic {}",
                    budget.elementary_draws,
                    check.analytic_vanilla
                );
            }
        }
        (ModelConfig::Heat { .. }, SamplerConfig::AbcGibbs { .. }) => {
            if budget.simulations != check.analytic_gibbs {
                bail!(
                    "gibbs ledger {} != analytic {}",
                    budget.simulations,
                    check.analytic_gibbs
                );
            }
        }
        (ModelConfig::Heat { .. }, SamplerConfig::VanillaTable { .. })
            if budget.simulations != check.analytic_vanilla => {
                bail!(
                    "vanilla ledger {} != analytic {}",
                    budget.simulations,
                    check.analytic_vanilla
                );
            }
        _ => {}
    }
    Ok(())
}

fn write_replicate_files(
    config: &ExperimentConfig,
    built: &BuiltExperiment,
    dir: &Path,
    label: &str,
    replicate: usize,
    samples: &[ParamState],
) -> Result<()> {
    if config.outputs.samples {
        let csv = samples_csv(built.model.as_model(), samples);
        write_text(&dir.join(format!("{label}_r{replicate}_samples.csv")), &csv)?;
    }
    for name in &config.outputs.density_blocks {
        let block = built.model.block_index(name)?;
        let trace: Vec<f64> = samples.iter().map(|s| s.blocks[block][0]).collect();
        let grid = emit_density(&trace, config.outputs.grid_points)?;
        write_text(
            &dir.join(format!("{label}_r{replicate}_density_{name}.csv")),
            &density_csv(&grid),
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ProbeSummary {
    pub experiment: String,
    pub seed: u64,
    pub kappa: f64,
    pub margin: f64,
    pub pass: bool,
    pub grid: Vec<f64>,
    pub pairwise: Vec<Vec<f64>>,
}

/// Run the configured contraction probe.
pub fn run_probe(config: &ExperimentConfig, opts: &RunOptions) -> Result<ProbeSummary> {
    let seed = opts.seed.unwrap_or(config.seed);
    let probe_cfg = config
        .probe
        .as_ref()
        .ok_or_else(|| anyhow!("config has no [probe] section"))?;
    let built = build_experiment(config, seed)?;
    let rng = RngStream::new(seed, 3);
    let sampler_opts = SamplerOptions::default();

    let result: ProbeResult = match &probe_cfg.target {
        ProbeTarget::Hyper { group } => {
            let hier = built
                .model
                .as_hierarchical()
                .ok_or_else(|| anyhow!("hyper probe needs a hierarchical model"))?;
            let groups = hier.hyper_groups();
            let group_ref = groups
                .get(*group)
                .ok_or_else(|| anyhow!("no hyper group {group}"))?;
            let mut base = hier.sample_prior(&mut RngStream::new(seed, 4));
            let cells: Vec<ParamState> = probe_cfg
                .grid
                .iter()
                .map(|&m| {
                    for &b in &group_ref.unit_blocks {
                        base.blocks[b] = vec![m];
                    }
                    base.clone()
                })
                .collect();
            contraction_probe_hyper(
                hier,
                *group,
                &cells,
                probe_cfg.rule.to_rule(),
                probe_cfg.draws_per_cell,
                &sampler_opts,
                &rng,
            )
            .map_err(|e| anyhow!("probe: {e}"))?
        }
        ProbeTarget::Block {
            block,
            conditioning,
        } => {
            let model = built.model.as_model();
            let mut base = model.sample_prior(&mut RngStream::new(seed, 4));
            let cells: Vec<ParamState> = probe_cfg
                .grid
                .iter()
                .map(|&v| {
                    base.blocks[*conditioning] = vec![v];
                    base.clone()
                })
                .collect();
            contraction_probe(
                model,
                &built.observed,
                *block,
                &cells,
                probe_cfg.rule.to_rule(),
                probe_cfg.draws_per_cell,
                &sampler_opts,
                &rng,
            )
            .map_err(|e| anyhow!("probe: {e}"))?
        }
    };

    let summary = ProbeSummary {
        experiment: config.name.clone(),
        seed,
        kappa: result.kappa,
        margin: result.margin,
        pass: result.pass,
        grid: probe_cfg.grid.clone(),
        pairwise: result.pairwise,
    };
    if let Some(dir) = &opts.out_dir {
        let json = serde_json::to_string_pretty(&summary)?;
        write_text(&dir.join("probe.json"), &(json + "\n"))?;
    }
    Ok(summary)
}

/// Emit the exact posterior density grids (normal-normal only).
pub fn run_oracle(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<String>> {
    let seed = opts.seed.unwrap_or(config.seed);
    let built = build_experiment(config, seed)?;
    let oracle = compute_oracle(config, &built)?;
    let blocks: Vec<String> = if config.diagnostics.oracle_blocks.is_empty() {
        let mut names = vec!["alpha".to_string()];
        names.extend((1..=3.min(oracle.mus.len())).map(|j| format!("mu{j}")));
        names
    } else {
        config.diagnostics.oracle_blocks.clone()
    };
    if let Some(dir) = &opts.out_dir {
        for name in &blocks {
            let block = built.model.block_index(name)?;
            let grid = oracle_grid(&oracle, name, block)?;
            write_text(
                &dir.join(format!("oracle_density_{name}.csv")),
                &density_csv(grid),
            )?;
        }
    }
    Ok(blocks)
}

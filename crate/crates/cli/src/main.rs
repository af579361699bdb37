use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use abcg_cli::config::ExperimentConfig;
use abcg_cli::runner::{run_experiment, run_oracle, run_probe, RunOptions};

#[derive(Parser)]
#[command(
    name = "abcg",
    about = "Budget-matched likelihood-free inference experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sampler of an experiment config over seeded replicates.
    Run {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Estimate the contraction coefficient configured in [probe].
    Probe {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit the exact posterior density grids (normal-normal model).
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            out_dir,
            seed,
            replicates,
        } => {
            let config = ExperimentConfig::from_path(&config)?;
            let opts = RunOptions {
                out_dir,
                seed,
                replicates,
                ..Default::default()
            };
            let summary = run_experiment(&config, &opts)?;
            for w in &summary.data_warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "experiment {} (model {}, seed {}, {} replicates)",
                summary.experiment, summary.model, summary.seed, summary.replicates
            );
            if let Some(check) = &summary.budget_check {
                println!(
                    "  budget matched: gibbs {} vs vanilla {} (slack {})",
                    check.analytic_gibbs, check.analytic_vanilla, check.iteration_cost
                );
            }
            for s in &summary.samplers {
                let sims: u64 = s.replicates.iter().map(|r| r.simulations).sum();
                let draws: u64 = s.replicates.iter().map(|r| r.elementary_draws).sum();
                println!(
                    "  {}: {} simulations, {} elementary draws, {:.2}s task time",
                    s.label, sims, draws, s.elapsed_secs
                );
                for (r, rep) in s.replicates.iter().enumerate() {
                    for (name, w1) in &rep.w1_to_oracle {
                        println!("    r{r} W1({name}) = {w1:.4}");
                    }
                    if let Some(mean) = rep.predictive_mean {
                        println!(
                            "    r{r} predictive distance = {mean:.4} +- {:.4}",
                            rep.predictive_se.unwrap_or(0.0)
                        );
                    }
                }
            }
        }
        Command::Probe {
            config,
            out_dir,
            seed,
        } => {
            let config = ExperimentConfig::from_path(&config)?;
            let opts = RunOptions {
                out_dir,
                seed,
                replicates: None,
                ..Default::default()
            };
            let summary = run_probe(&config, &opts)?;
            println!(
                "probe {}: kappa = {:.4} (margin {:.4}) -> {}",
                summary.experiment,
                summary.kappa,
                summary.margin,
                if summary.pass {
                    "PASS (< 1/2)"
                } else {
                    "FAIL (>= 1/2)"
                }
            );
        }
        Command::Oracle {
            config,
            out_dir,
            seed,
        } => {
            let config = ExperimentConfig::from_path(&config)?;
            let opts = RunOptions {
                out_dir,
                seed,
                replicates: None,
                ..Default::default()
            };
            let blocks = run_oracle(&config, &opts)?;
            println!("oracle grids written for: {}", blocks.join(", "));
        }
    }
    Ok(())
}

//! End-to-end harness behavior on the shipped configurations.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use abcg::stats::variance;

use abcg_cli::config::ExperimentConfig;
use abcg_cli::runner::{run_experiment, RunOptions};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_path(&config_path(name)).expect("shipped config parses")
}

#[test]
fn all_shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            ExperimentConfig::from_path(&path)
                .unwrap_or_else(|e| panic!("{} failed to parse: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 10, "expected the full config set, found {count}");
}

#[test]
fn heat_sweep_trades_table_size_for_iterations() {
    // Fixed total budget: tiny tables accept prior draws (wide chain), a
    // moderate table concentrates the posterior.
    let config = load("heat_sweep.toml");
    let opts = RunOptions {
        replicates: Some(1),
        keep_samples: true,
        ..Default::default()
    };
    let summary = run_experiment(&config, &opts).unwrap();

    let sd_of = |label: &str| {
        let rep = &summary
            .samplers
            .iter()
            .find(|s| s.label == label)
            .expect("labelled sampler")
            .replicates[0];
        variance(&rep.trace(0)).sqrt()
    };
    let wide = sd_of("gibbs-neps1");
    let sharp = sd_of("gibbs-neps10");
    assert!(
        sharp < 0.8 * wide,
        "no concentration: sd {wide:.3} (tables of 1) vs {sharp:.3} (tables of 10)"
    );

    // Both ledgers spent the same simulation budget.
    let sims_of = |label: &str| {
        summary
            .samplers
            .iter()
            .find(|s| s.label == label)
            .unwrap()
            .replicates[0]
            .simulations
    };
    assert_eq!(sims_of("gibbs-neps1"), sims_of("gibbs-neps10"));
    assert_eq!(sims_of("gibbs-neps10"), sims_of("gibbs-neps100"));
}

#[test]
fn stellar_workflow_runs_on_a_local_file() {
    // Synthetic seven-object flux table in the loader's format, including a
    // couple of rows with missing markers.
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("flux.txt");
    {
        let mut rng = abcg::RngStream::new(99, 0);
        let mut f = std::fs::File::create(&data_path).unwrap();
        for day in 0..210 {
            if day == 17 || day == 140 {
                writeln!(f, "1.0 2.0 NA 4.0 5.0 6.0 7.0").unwrap();
                continue;
            }
            let row: Vec<String> = (0..7)
                .map(|_| format!("{:.4}", rng.uniform_in(-2.0, 2.0)))
                .collect();
            writeln!(f, "{}", row.join(" ")).unwrap();
        }
    }

    let mut config = load("ma2_stellar.toml");
    config.data_file = Some(data_path);
    // Desk-size the run: the shipped config is scaled for a real session.
    config.samplers = toml::from_str::<ExperimentConfig>(
        r#"
name = "x"
seed = 1
[model]
kind = "ma2"
n = 7
t_len = 208
pilot = 300
[[samplers]]
kind = "hierarchical"
iterations = 8
unit_tables = [5, 5]
hyper_tables = [5, 5]
"#,
    )
    .unwrap()
    .samplers;
    config.burn_in = 2;
    if let abcg_cli::config::ModelConfig::Ma2 { pilot, .. } = &mut config.model {
        *pilot = 300;
    }
    config.diagnostics.predictive_reps = 5;

    let out = tempfile::tempdir().unwrap();
    let summary = run_experiment(
        &config,
        &RunOptions {
            out_dir: Some(out.path().to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap();
    // The two bad rows were dropped and reported.
    assert_eq!(
        summary.data_warnings.len(),
        1,
        "{:?}",
        summary.data_warnings
    );
    assert!(summary.data_warnings[0].contains("dropped 2 rows"));
    let rep = &summary.samplers[0].replicates[0];
    assert_eq!(rep.retained_samples, 6);
    assert!(rep.predictive_mean.unwrap().is_finite());
    assert!(out.path().join("summary.json").exists());
}

#[test]
fn gk_configs_run_at_reduced_size() {
    for name in ["gk_simple.toml", "gk_doubly.toml"] {
        let mut config = load(name);
        config.replicates = 1;
        // Shrink the tables for a smoke pass.
        for s in &mut config.samplers {
            match s {
                abcg_cli::config::SamplerConfig::Hierarchical {
                    iterations,
                    unit_tables,
                    hyper_tables,
                    shared_table,
                    ..
                } => {
                    *iterations = 8;
                    for t in unit_tables.iter_mut().chain(hyper_tables.iter_mut()) {
                        *t = 4;
                    }
                    if let Some(t) = shared_table {
                        *t = 4;
                    }
                }
                abcg_cli::config::SamplerConfig::VanillaTable {
                    table_size, keep, ..
                } => {
                    *table_size = 64;
                    *keep = 8;
                }
                _ => {}
            }
        }
        config.burn_in = 2;
        config.diagnostics.predictive_reps = 5;
        let summary = run_experiment(
            &config,
            &RunOptions {
                keep_samples: true,
                ..Default::default()
            },
        )
        .unwrap_or_else(|e| panic!("{name}: {e}"));
        for s in &summary.samplers {
            let rep = &s.replicates[0];
            assert!(rep.retained_samples > 0);
            assert!(rep.simulations > 0);
            for sample in &rep.samples {
                assert!(sample.blocks.iter().flatten().all(|v| v.is_finite()));
            }
        }
    }
}

#[test]
fn missing_data_file_is_a_clear_error() {
    let mut config = load("ma2_stellar.toml");
    config.data_file = Some(PathBuf::from("/nonexistent/flux.txt"));
    let err = run_experiment(&config, &RunOptions::default()).unwrap_err();
    assert!(err.to_string().contains("flux"), "{err}");
}

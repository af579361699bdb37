//! Experiment harness for the component-wise ABC samplers: declarative TOML
//! configs, seeded replicates, budget-matched comparisons, CSV/JSON artifacts.

pub mod build;
pub mod config;
pub mod data;
pub mod output;
pub mod runner;

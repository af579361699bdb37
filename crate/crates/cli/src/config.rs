//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use abcg::ToleranceRule;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Leading iterations dropped from Gibbs-family chains before any output
    /// or scoring.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Assert that the configured samplers consume matching budgets.
    #[serde(default)]
    pub budget_matched: bool,
    pub model: ModelConfig,
    #[serde(default)]
    pub data_file: Option<PathBuf>,
    pub samplers: Vec<SamplerConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
}

fn default_replicates() -> usize {
    1
}

fn default_burn_in() -> usize {
    5
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    NormalNormal {
        n: usize,
        k: usize,
        sigma: f64,
        varsigma: f64,
        #[serde(default)]
        alpha_true: Option<f64>,
    },
    Gk {
        n: usize,
        obs_per_unit: usize,
        /// Fixed (B, g, k); omit to infer them as extra blocks.
        #[serde(default)]
        known_params: Option<[f64; 3]>,
        #[serde(default)]
        alpha_true: Option<f64>,
    },
    Ma2 {
        n: usize,
        t_len: usize,
        /// Prior-predictive pilot size for the pooled-distance normalizers.
        #[serde(default = "default_pilot")]
        pilot: usize,
    },
    Heat {
        n: usize,
        delta: f64,
        t_steps: usize,
        noise_sd: f64,
        #[serde(default)]
        theta_true: Option<Vec<f64>>,
    },
    MixtureUniform {
        observed: f64,
    },
}

fn default_pilot() -> usize {
    100_000
}

impl ModelConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelConfig::NormalNormal { .. } => "normal-normal",
            ModelConfig::Gk { .. } => "gk",
            ModelConfig::Ma2 { .. } => "ma2",
            ModelConfig::Heat { .. } => "heat",
            ModelConfig::MixtureUniform { .. } => "mixture-uniform",
        }
    }
}

/// Acceptance rule in configuration form.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum RuleConfig {
    Fixed { fixed: f64 },
    BestOf { best_of: usize },
}

impl RuleConfig {
    pub fn to_rule(self) -> ToleranceRule {
        match self {
            RuleConfig::Fixed { fixed } => ToleranceRule::Fixed(fixed),
            RuleConfig::BestOf { best_of } => ToleranceRule::BestOfN(best_of),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerConfig {
    /// Independent draws; fresh rejection loop or reference table per draw.
    Vanilla {
        #[serde(default)]
        label: Option<String>,
        n: usize,
        rule: RuleConfig,
        #[serde(default = "default_max_attempts")]
        max_attempts: u64,
    },
    /// One reference table, keep the best `keep` rows.
    VanillaTable {
        #[serde(default)]
        label: Option<String>,
        table_size: usize,
        keep: usize,
    },
    /// Generic component-wise sampler with one rule for every block.
    AbcGibbs {
        #[serde(default)]
        label: Option<String>,
        iterations: usize,
        rule: RuleConfig,
        /// Update every block through its exact conditional instead.
        #[serde(default)]
        exact: bool,
        /// Starting point as one row per block; omitted = prior draw.
        #[serde(default)]
        init: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_max_attempts")]
        max_attempts: u64,
    },
    /// Hierarchical sampler; table sizes per hyper group.
    Hierarchical {
        #[serde(default)]
        label: Option<String>,
        iterations: usize,
        unit_tables: Vec<usize>,
        hyper_tables: Vec<usize>,
        /// Table size for shared data-level blocks, if the model has any.
        #[serde(default)]
        shared_table: Option<usize>,
        /// Replace unit updates by exact conditional draws.
        #[serde(default)]
        exact_units: bool,
    },
    Retention {
        #[serde(default)]
        label: Option<String>,
        iterations: usize,
        eps_alpha: f64,
    },
    Smc {
        #[serde(default)]
        label: Option<String>,
        particles: usize,
        steps: usize,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_alpha_quality")]
        alpha_quality: f64,
        #[serde(default)]
        n_min: Option<usize>,
        #[serde(default = "default_move_cap")]
        move_cap: u64,
        /// Disable to run the bare survival-loop move kernel.
        #[serde(default = "default_true")]
        prior_corrected: bool,
    },
}

fn default_max_attempts() -> u64 {
    1_000_000
}

fn default_m() -> usize {
    1
}

fn default_alpha_quality() -> f64 {
    0.9
}

fn default_move_cap() -> u64 {
    10_000
}

impl SamplerConfig {
    pub fn label(&self) -> String {
        let (custom, default) = match self {
            SamplerConfig::Vanilla { label, .. } => (label, "vanilla"),
            SamplerConfig::VanillaTable { label, .. } => (label, "vanilla"),
            SamplerConfig::AbcGibbs { label, exact, .. } => {
                (label, if *exact { "exact-gibbs" } else { "abc-gibbs" })
            }
            SamplerConfig::Hierarchical { label, .. } => (label, "abc-gibbs"),
            SamplerConfig::Retention { label, .. } => (label, "retention"),
            SamplerConfig::Smc { label, .. } => (label, "smc"),
        };
        custom.clone().unwrap_or_else(|| default.to_string())
    }

    /// Gibbs-family samplers get the burn-in drop.
    pub fn is_chain(&self) -> bool {
        matches!(
            self,
            SamplerConfig::AbcGibbs { .. }
                | SamplerConfig::Hierarchical { .. }
                | SamplerConfig::Retention { .. }
        )
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write one samples CSV per sampler and replicate.
    #[serde(default = "default_true")]
    pub samples: bool,
    /// Write kernel density grids for the named blocks.
    #[serde(default)]
    pub density_blocks: Vec<String>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_true() -> bool {
    true
}

fn default_grid_points() -> usize {
    256
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            samples: true,
            density_blocks: Vec::new(),
            grid_points: default_grid_points(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Compare the named blocks against the exact-posterior oracle
    /// (normal-normal only).
    #[serde(default)]
    pub oracle_blocks: Vec<String>,
    #[serde(default = "default_oracle_grid")]
    pub oracle_grid: usize,
    /// Posterior-predictive scoring replications (0 = skip).
    #[serde(default)]
    pub predictive_reps: usize,
}

fn default_oracle_grid() -> usize {
    1024
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub target: ProbeTarget,
    pub rule: RuleConfig,
    pub grid: Vec<f64>,
    #[serde(default = "default_draws_per_cell")]
    pub draws_per_cell: usize,
}

fn default_draws_per_cell() -> usize {
    4000
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProbeTarget {
    /// Probe a hyper block: each grid value fills every unit parameter of the
    /// group, so the hyper summaries sweep the grid.
    Hyper { group: usize },
    /// Probe a generic block while a conditioning block sweeps the grid; the
    /// remaining blocks come from a prior draw.
    Block { block: usize, conditioning: usize },
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            bail!("replicates must be >= 1");
        }
        if self.samplers.is_empty() && self.probe.is_none() {
            bail!("no samplers and no probe configured");
        }
        let mut labels: Vec<String> = self.samplers.iter().map(|s| s.label()).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.samplers.len() {
            bail!("sampler labels must be unique; set `label` to disambiguate");
        }
        if !self.diagnostics.oracle_blocks.is_empty()
            && !matches!(self.model, ModelConfig::NormalNormal { .. })
        {
            bail!("oracle comparisons require the normal-normal model");
        }
        if self.budget_matched
            && !matches!(
                self.model,
                ModelConfig::NormalNormal { .. } | ModelConfig::Heat { .. }
            )
        {
            bail!("budget_matched checks are defined for normal-normal and heat runs");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_round_trip() {
        let text = r#"
name = "demo"
seed = 7
replicates = 2
budget_matched = true

[model]
kind = "normal-normal"
n = 4
k = 3
sigma = 1.0
varsigma = 1.0
alpha_true = 1.0

[[samplers]]
kind = "hierarchical"
iterations = 10
unit_tables = [5]
hyper_tables = [5]

[[samplers]]
kind = "vanilla-table"
table_size = 50
keep = 10

[outputs]
density_blocks = ["alpha"]

[diagnostics]
oracle_blocks = ["alpha", "mu1"]
predictive_reps = 20
"#;
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        config.validate().unwrap();
        assert_eq!(config.samplers.len(), 2);
        assert_eq!(config.samplers[0].label(), "abc-gibbs");
        assert!(config.samplers[0].is_chain());
        assert!(!config.samplers[1].is_chain());
        assert_eq!(config.model.kind_name(), "normal-normal");
    }

    #[test]
    fn rule_config_forms() {
        let fixed: RuleConfig = toml::from_str::<toml::Value>("rule = { fixed = 0.5 }")
            .unwrap()
            .get("rule")
            .cloned()
            .unwrap()
            .try_into()
            .unwrap();
        assert!(matches!(fixed.to_rule(), ToleranceRule::Fixed(e) if e == 0.5));
        let best: RuleConfig = toml::from_str::<toml::Value>("rule = { best_of = 30 }")
            .unwrap()
            .get("rule")
            .cloned()
            .unwrap()
            .try_into()
            .unwrap();
        assert!(matches!(best.to_rule(), ToleranceRule::BestOfN(30)));
    }

    #[test]
    fn rejects_duplicate_labels() {
        let text = r#"
name = "dup"
seed = 1
[model]
kind = "mixture-uniform"
observed = 5.0
[[samplers]]
kind = "vanilla"
n = 10
rule = { fixed = 0.5 }
[[samplers]]
kind = "vanilla"
n = 20
rule = { fixed = 0.5 }
"#;
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_oracle_on_non_nn_model() {
        let text = r#"
name = "bad"
seed = 1
[model]
kind = "mixture-uniform"
observed = 5.0
[[samplers]]
kind = "vanilla"
n = 10
rule = { fixed = 0.5 }
[diagnostics]
oracle_blocks = ["alpha"]
"#;
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        assert!(config.validate().is_err());
    }
}

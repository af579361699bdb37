//! Construction of models and observed data from configuration.

use anyhow::{anyhow, bail, Result};

use abcg::model::{Dataset, HierarchicalModel, Model, ParamState};
use abcg::models::{
    GkModel, GkSpec, HeatEqSpec, HeatModel, Ma2HierModel, Ma2HierSpec, MixtureUniformModel,
    NormalNormalModel, NormalNormalSpec,
};
use abcg::RngStream;

use crate::config::{ExperimentConfig, ModelConfig};
use crate::data::load_stellar_flux;

pub enum BuiltModel {
    NormalNormal(NormalNormalModel),
    Gk(GkModel),
    Ma2(Ma2HierModel),
    Heat(HeatModel),
    Mixture(MixtureUniformModel),
}

impl BuiltModel {
    pub fn as_model(&self) -> &dyn Model {
        match self {
            BuiltModel::NormalNormal(m) => m,
            BuiltModel::Gk(m) => m,
            BuiltModel::Ma2(m) => m,
            BuiltModel::Heat(m) => m,
            BuiltModel::Mixture(m) => m,
        }
    }

    pub fn as_hierarchical(&self) -> Option<&dyn HierarchicalModel> {
        match self {
            BuiltModel::NormalNormal(m) => Some(m),
            BuiltModel::Gk(m) => Some(m),
            BuiltModel::Ma2(m) => Some(m),
            BuiltModel::Heat(_) | BuiltModel::Mixture(_) => None,
        }
    }

    pub fn block_index(&self, name: &str) -> Result<usize> {
        let model = self.as_model();
        (0..model.block_count())
            .find(|&b| model.block_name(b) == name)
            .ok_or_else(|| anyhow!("unknown block name {name}"))
    }
}

pub struct BuiltExperiment {
    pub model: BuiltModel,
    pub observed: Dataset,
    pub truth: Option<ParamState>,
    pub data_warnings: Vec<String>,
}

/// Build the model and its observed dataset. Synthetic data comes from the
/// dedicated data stream; a data file (stellar flux) overrides it for the
/// MA(2) model.
pub fn build_experiment(config: &ExperimentConfig, seed: u64) -> Result<BuiltExperiment> {
    let mut data_rng = RngStream::new(seed, 0);
    let mut warnings = Vec::new();

    let built = match &config.model {
        ModelConfig::NormalNormal {
            n,
            k,
            sigma,
            varsigma,
            alpha_true,
        } => {
            let spec = NormalNormalSpec::new(*n, *k, *sigma, *varsigma)
                .map_err(|e| anyhow!("normal-normal spec: {e}"))?;
            let model = NormalNormalModel::new(spec);
            let (truth, observed) = model.generate_truth(*alpha_true, &mut data_rng);
            BuiltExperiment {
                model: BuiltModel::NormalNormal(model),
                observed,
                truth: Some(truth),
                data_warnings: warnings,
            }
        }
        ModelConfig::Gk {
            n,
            obs_per_unit,
            known_params,
            alpha_true,
        } => {
            let spec = match known_params {
                Some([b, g, k]) => GkSpec::simple(*n, *obs_per_unit, (*b, *g, *k)),
                None => GkSpec::doubly_hierarchical(*n, *obs_per_unit),
            }
            .map_err(|e| anyhow!("gk spec: {e}"))?;
            let model = GkModel::new(spec);
            let (truth, observed) = model.generate_truth(*alpha_true, &mut data_rng);
            BuiltExperiment {
                model: BuiltModel::Gk(model),
                observed,
                truth: Some(truth),
                data_warnings: warnings,
            }
        }
        ModelConfig::Ma2 { n, t_len, pilot } => {
            let spec = Ma2HierSpec::new(*n, *t_len).map_err(|e| anyhow!("ma2 spec: {e}"))?;
            let mut model = Ma2HierModel::new(spec);
            let (truth, observed) = match &config.data_file {
                Some(path) => {
                    let flux = load_stellar_flux(path)?;
                    if flux.series.len() != *n {
                        bail!(
                            "data file holds {} series, config declares n = {n}",
                            flux.series.len()
                        );
                    }
                    if flux.series[0].len() != *t_len {
                        bail!(
                            "data file series length {} differs from t_len = {t_len}",
                            flux.series[0].len()
                        );
                    }
                    warnings.extend(flux.warnings);
                    (None, flux.series)
                }
                None => {
                    let (truth, observed) = model.generate_truth(None, &mut data_rng);
                    (Some(truth), observed)
                }
            };
            let mut pilot_rng = RngStream::new(seed, 0xCA1B);
            model
                .calibrate_normalizers(&observed, *pilot, &mut pilot_rng)
                .map_err(|e| anyhow!("pilot calibration: {e}"))?;
            BuiltExperiment {
                model: BuiltModel::Ma2(model),
                observed,
                truth,
                data_warnings: warnings,
            }
        }
        ModelConfig::Heat {
            n,
            delta,
            t_steps,
            noise_sd,
            theta_true,
        } => {
            let spec = HeatEqSpec::with_options(*n, *delta, *t_steps, None, *noise_sd)
                .map_err(|e| anyhow!("heat spec: {e}"))?;
            let model = HeatModel::new(spec);
            let (truth, observed) = model.generate_truth(theta_true.clone(), &mut data_rng);
            BuiltExperiment {
                model: BuiltModel::Heat(model),
                observed,
                truth: Some(truth),
                data_warnings: warnings,
            }
        }
        ModelConfig::MixtureUniform { observed } => BuiltExperiment {
            model: BuiltModel::Mixture(MixtureUniformModel::new()),
            observed: MixtureUniformModel::observed_dataset(*observed),
            truth: None,
            data_warnings: warnings,
        },
    };
    Ok(built)
}

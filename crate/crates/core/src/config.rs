//! Run configuration for fitting a dataset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::comparators::{BootstrapConfig, MleConfig};
use crate::data::{Centering, CovariateRoles, Dataset};
use crate::error::{Error, Result};
use crate::mcmc::SamplerConfig;
use crate::model::ModelKind;
use crate::priors::{preset, PicPriorSpec, Preset};
use crate::report::Profile;

/// A preset name or an inline specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorChoice {
    Preset(Preset),
    Inline(PicPriorSpec),
}

impl PriorChoice {
    pub fn resolve(&self) -> PicPriorSpec {
        match self {
            PriorChoice::Preset(p) => preset(*p),
            PriorChoice::Inline(s) => s.clone(),
        }
    }
}

/// A reporting profile given as raw covariate values by column name;
/// columns not listed are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub name: String,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default = "default_prior")]
    pub prior: PriorChoice,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub covariates: CovariateRoles,
    /// Subtract column means from covariates before fitting.
    #[serde(default)]
    pub center: bool,
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
    #[serde(default)]
    pub profiles: Vec<ProfileSpec>,
    #[serde(default)]
    pub survival_times: Vec<f64>,
    #[serde(default)]
    pub mle: MleConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
}

fn default_prior() -> PriorChoice {
    PriorChoice::Preset(Preset::VagueCervical)
}

fn default_time_unit() -> String {
    "years".into()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks the role map against the dataset and returns the centering
    /// offsets (empty when centering is off).
    pub fn prepare(&self, data: &Dataset) -> Result<Centering> {
        for name in self.covariates.mix.iter().chain(&self.covariates.inc) {
            data.column(name)?;
        }
        for p in &self.profiles {
            for name in p.values.keys() {
                if !self.covariates.mix.contains(name) && !self.covariates.inc.contains(name) {
                    return Err(Error::InvalidConfig(format!(
                        "profile `{}` sets `{name}`, which has no model role",
                        p.name
                    )));
                }
            }
        }
        if self.survival_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidConfig("survival times must be finite and nonnegative".into()));
        }
        if self.center {
            data.centering(&self.covariates)
        } else {
            Ok(Centering::default())
        }
    }

    /// Profiles on the model's covariate scale. Without any configured
    /// profile a single `base` profile with every raw covariate at zero is used.
    pub fn model_profiles(&self, centering: &Centering) -> Vec<Profile> {
        let specs = if self.profiles.is_empty() {
            vec![ProfileSpec {
                name: "base".into(),
                values: BTreeMap::new(),
            }]
        } else {
            self.profiles.clone()
        };
        let value = |spec: &ProfileSpec, name: &String| spec.values.get(name).copied().unwrap_or(0.0) - centering.offset(name);
        specs
            .iter()
            .map(|s| {
                let mut x_mix = vec![1.0];
                x_mix.extend(self.covariates.mix.iter().map(|n| value(s, n)));
                let x_inc = self.covariates.inc.iter().map(|n| value(s, n)).collect();
                Profile::new(s.name.clone(), x_mix, x_inc)
            })
            .collect()
    }
}

//! The JSON model configuration and the [`Model`] implementation it selects.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{Context, ExecError, Model};
use crate::dist::{Distribution, Family};

use super::demo::{BetaBernoulli, NormalNormal};
use super::ibm::{simulate_ibm, IbmConfig};
use super::sir::{simulate_sir, SirConfig};
use super::{EpiPriors, EpidemicPath, InterventionPolicy, ObservationSeries, OutcomeConstraint};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcuSettings {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub capacity: Option<u64>,
}

fn default_rho() -> f64 {
    0.05
}

fn default_dt() -> f64 {
    1.0
}

impl Default for IcuSettings {
    fn default() -> Self {
        Self {
            rho: default_rho(),
            capacity: None,
        }
    }
}

/// Per-contact transmission probability of the individual-based model: a
/// fixed number or a prior to sample at site `p_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransmissionParam {
    Fixed(f64),
    Latent(Distribution),
}

impl TransmissionParam {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            TransmissionParam::Fixed(p) if (0.0..=1.0).contains(p) => Ok(()),
            TransmissionParam::Fixed(p) => Err(format!("must lie in [0, 1], got {p}")),
            TransmissionParam::Latent(d) => match d.family() {
                Family::Beta { .. } => Ok(()),
                Family::Uniform { low, high } if *low >= 0.0 && *high <= 1.0 => Ok(()),
                _ => Err("prior support must lie within [0, 1]".into()),
            },
        }
    }
}

/// Settings shared by the two epidemic simulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiSettings {
    pub population: u64,
    pub initial_infected: u64,
    pub horizon_days: u32,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub priors: EpiPriors,
    #[serde(default)]
    pub policy: InterventionPolicy,
    #[serde(default)]
    pub icu: IcuSettings,
    #[serde(default, skip_serializing_if = "ObservationSeries::is_empty")]
    pub data: ObservationSeries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contacts_per_day: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_contact_transmission: Option<TransmissionParam>,
}

impl EpiSettings {
    pub fn sir(population: u64, initial_infected: u64, horizon_days: u32) -> Self {
        Self {
            population,
            initial_infected,
            horizon_days,
            dt: 1.0,
            priors: EpiPriors::default(),
            policy: InterventionPolicy::default(),
            icu: IcuSettings::default(),
            data: ObservationSeries::default(),
            contacts_per_day: None,
            per_contact_transmission: None,
        }
    }

    pub fn sir_config(&self) -> SirConfig {
        SirConfig {
            population: self.population,
            initial_infected: self.initial_infected,
            horizon_days: self.horizon_days,
            dt: self.dt,
        }
    }

    pub fn ibm_config(&self) -> Result<IbmConfig, ConfigError> {
        Ok(IbmConfig {
            population: self.population,
            initial_infected: self.initial_infected,
            horizon_days: self.horizon_days,
            contacts_per_day: self
                .contacts_per_day
                .ok_or_else(|| ConfigError::new("contacts_per_day", "required for model \"ibm\""))?,
            per_contact_transmission: self.per_contact_transmission.clone().ok_or_else(|| {
                ConfigError::new("per_contact_transmission", "required for model \"ibm\"")
            })?,
        })
    }

    pub fn data_opt(&self) -> Option<&ObservationSeries> {
        (!self.data.is_empty()).then_some(&self.data)
    }

    fn validate_common(&self) -> Result<(), ConfigError> {
        if self.population == 0 {
            return Err(ConfigError::new("population", "must be positive"));
        }
        if self.initial_infected == 0 || self.initial_infected > self.population {
            return Err(ConfigError::new(
                "initial_infected",
                format!("must lie in [1, population={}]", self.population),
            ));
        }
        for (name, prior) in [("priors.beta", &self.priors.beta), ("priors.gamma", &self.priors.gamma)] {
            if !prior.has_positive_support() {
                return Err(ConfigError::new(
                    name,
                    format!("{} prior must have support within the positive reals", prior.family_name()),
                ));
            }
        }
        let p = &self.policy;
        if !(0.0..=1.0).contains(&p.contact_reduction) {
            return Err(ConfigError::new("policy.contact_reduction", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&p.vaccination_coverage) {
            return Err(ConfigError::new("policy.vaccination_coverage", "must lie in [0, 1]"));
        }
        if p.start_day > self.horizon_days {
            return Err(ConfigError::new("policy.start_day", "must not exceed horizon_days"));
        }
        if !(0.0..=1.0).contains(&self.icu.rho) {
            return Err(ConfigError::new("icu.rho", "must lie in [0, 1]"));
        }
        self.data
            .check_days(self.horizon_days)
            .map_err(|m| ConfigError::new("data", m))
    }
}

/// A model selected by the `model` key of the configuration JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    Sir(EpiSettings),
    Ibm(EpiSettings),
    NormalNormal(NormalNormal),
    BetaBernoulli(BetaBernoulli),
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Sir(_) => "sir",
            ModelConfig::Ibm(_) => "ibm",
            ModelConfig::NormalNormal(_) => "normal_normal",
            ModelConfig::BetaBernoulli(_) => "beta_bernoulli",
        }
    }

    pub fn epi(&self) -> Option<&EpiSettings> {
        match self {
            ModelConfig::Sir(s) | ModelConfig::Ibm(s) => Some(s),
            _ => None,
        }
    }

    pub fn epi_mut(&mut self) -> Option<&mut EpiSettings> {
        match self {
            ModelConfig::Sir(s) | ModelConfig::Ibm(s) => Some(s),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            ModelConfig::Sir(s) => {
                s.validate_common()?;
                super::sir::steps_per_day(s.dt).map_err(|m| ConfigError::new("dt", m))?;
                Ok(())
            }
            ModelConfig::Ibm(s) => {
                s.validate_common()?;
                if s.dt != 1.0 {
                    return Err(ConfigError::new("dt", "the individual-based model steps in whole days (dt = 1)"));
                }
                let ibm = s.ibm_config()?;
                if ibm.contacts_per_day == 0 {
                    return Err(ConfigError::new("contacts_per_day", "must be at least 1"));
                }
                ibm.per_contact_transmission
                    .validate()
                    .map_err(|m| ConfigError::new("per_contact_transmission", m))
            }
            ModelConfig::NormalNormal(m) => m.validate(),
            ModelConfig::BetaBernoulli(m) => m.validate(),
        }
    }

    /// The same model under a different intervention policy.
    pub fn with_policy(&self, policy: InterventionPolicy) -> Self {
        let mut next = self.clone();
        if let Some(s) = next.epi_mut() {
            s.policy = policy;
        }
        next
    }

    pub fn data(&self) -> Option<&ObservationSeries> {
        self.epi().and_then(|s| s.data_opt())
    }

    pub fn constraint(&self) -> Option<OutcomeConstraint> {
        self.epi()
            .and_then(|s| s.icu.capacity)
            .map(|icu_capacity| OutcomeConstraint { icu_capacity })
    }

    /// Runs the epidemic simulator directly, returning its daily path.
    pub fn simulate(&self, ctx: &mut Context) -> Result<Option<EpidemicPath>, ExecError> {
        match self {
            ModelConfig::Sir(s) => simulate_sir(ctx, &s.sir_config(), &s.priors, &s.policy, s.data_opt(), s.icu.rho).map(Some),
            ModelConfig::Ibm(s) => {
                let cfg = s.ibm_config().map_err(|e| ExecError::Config(e.to_string()))?;
                simulate_ibm(ctx, &cfg, &s.priors, &s.policy, s.data_opt(), s.icu.rho).map(Some)
            }
            ModelConfig::NormalNormal(m) => m.run(ctx).map(|_| None),
            ModelConfig::BetaBernoulli(m) => m.run(ctx).map(|_| None),
        }
    }
}

impl Model for ModelConfig {
    fn execute(&self, ctx: &mut Context) -> Result<(), ExecError> {
        self.simulate(ctx).map(|_| ())
    }

    fn latent_labels(&self) -> Option<Vec<String>> {
        let labels: Vec<&str> = match self {
            ModelConfig::Sir(_) => vec!["beta", "gamma"],
            ModelConfig::Ibm(s) => match s.per_contact_transmission {
                Some(TransmissionParam::Latent(_)) => vec!["gamma", "p_c"],
                _ => vec!["gamma"],
            },
            ModelConfig::NormalNormal(_) => vec!["theta"],
            ModelConfig::BetaBernoulli(_) => vec!["p"],
        };
        Some(labels.into_iter().map(String::from).collect())
    }
}

//! Small conjugate models with closed-form posteriors, used to check the
//! inference engines end to end.

use serde::{Deserialize, Serialize};

use crate::context::{Context, ExecError};
use crate::dist::Distribution;

use super::config::ConfigError;

/// `theta ~ Normal(prior_mean, prior_std)`, each observation
/// `y ~ Normal(theta, noise_std)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalNormal {
    #[serde(default)]
    pub prior_mean: f64,
    #[serde(default = "one")]
    pub prior_std: f64,
    #[serde(default = "one")]
    pub noise_std: f64,
    #[serde(default)]
    pub observations: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl NormalNormal {
    pub fn validate(&self) -> Result<(), ConfigError> {
        Distribution::normal(self.prior_mean, self.prior_std)
            .map_err(|e| ConfigError::new("prior_std", e.to_string()))?;
        Distribution::normal(0.0, self.noise_std).map_err(|e| ConfigError::new("noise_std", e.to_string()))?;
        if self.observations.iter().any(|y| !y.is_finite()) {
            return Err(ConfigError::new("observations", "must be finite"));
        }
        Ok(())
    }

    pub fn run(&self, ctx: &mut Context) -> Result<(), ExecError> {
        let theta = ctx.sample_real("theta", &Distribution::normal(self.prior_mean, self.prior_std)?)?;
        let noise = Distribution::normal(theta, self.noise_std)?;
        for &y in &self.observations {
            ctx.observe("y", &noise, y)?;
        }
        Ok(())
    }

    /// Exact posterior mean and variance of `theta`.
    pub fn posterior(&self) -> (f64, f64) {
        let prior_prec = 1.0 / (self.prior_std * self.prior_std);
        let noise_prec = 1.0 / (self.noise_std * self.noise_std);
        let prec = prior_prec + noise_prec * self.observations.len() as f64;
        let mean = (prior_prec * self.prior_mean + noise_prec * self.observations.iter().sum::<f64>()) / prec;
        (mean, 1.0 / prec)
    }
}

/// `p ~ Beta(alpha, beta)`, each observation `y ~ Bernoulli(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBernoulli {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub observations: Vec<bool>,
}

impl BetaBernoulli {
    pub fn validate(&self) -> Result<(), ConfigError> {
        Distribution::beta(self.alpha, self.beta)
            .map(|_| ())
            .map_err(|e| ConfigError::new("alpha/beta", e.to_string()))
    }

    pub fn run(&self, ctx: &mut Context) -> Result<(), ExecError> {
        let p = ctx.sample_real("p", &Distribution::beta(self.alpha, self.beta)?)?;
        let lik = Distribution::bernoulli(p)?;
        for &y in &self.observations {
            ctx.observe("y", &lik, y)?;
        }
        Ok(())
    }

    pub fn posterior_mean(&self) -> f64 {
        let k = self.observations.iter().filter(|&&y| y).count() as f64;
        let n = self.observations.len() as f64;
        (self.alpha + k) / (self.alpha + self.beta + n)
    }
}

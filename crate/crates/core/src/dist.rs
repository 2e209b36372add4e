//! Primitive distributions: validated construction, log density/mass and
//! sampling.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::value::Value;

const CATEGORICAL_SUM_TOL: f64 = 1e-9;
const NORMALISED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid {family} parameters: {reason}")]
    InvalidParameters { family: &'static str, reason: String },
    #[error("{family} distribution cannot score a {kind} value")]
    TypeMismatch {
        family: &'static str,
        kind: &'static str,
    },
}

/// The parameterised family behind a [`Distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Beta { alpha: f64, beta: f64 },
    Gamma { shape: f64, rate: f64 },
    Bernoulli { p: f64 },
    Binomial { n: u64, p: f64 },
    Categorical { probs: Vec<f64> },
    Poisson { rate: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Uniform { .. } => "uniform",
            Family::Normal { .. } => "normal",
            Family::LogNormal { .. } => "log_normal",
            Family::Beta { .. } => "beta",
            Family::Gamma { .. } => "gamma",
            Family::Bernoulli { .. } => "bernoulli",
            Family::Binomial { .. } => "binomial",
            Family::Categorical { .. } => "categorical",
            Family::Poisson { .. } => "poisson",
        }
    }
}

/// A primitive distribution whose parameters have been checked.
///
/// Serialises as `{"family": "...", "params": {...}}`; deserialisation goes
/// through the same validation as the constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct Distribution(Family);

impl TryFrom<Family> for Distribution {
    type Error = DistError;

    fn try_from(family: Family) -> Result<Self, DistError> {
        Distribution::new(family)
    }
}

impl From<Distribution> for Family {
    fn from(d: Distribution) -> Family {
        d.0
    }
}

fn invalid(family: &'static str, reason: impl Into<String>) -> DistError {
    DistError::InvalidParameters {
        family,
        reason: reason.into(),
    }
}

fn finite(family: &'static str, name: &str, x: f64) -> Result<(), DistError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(family, format!("{name} must be finite, got {x}")))
    }
}

fn positive(family: &'static str, name: &str, x: f64) -> Result<(), DistError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(family, format!("{name} must be > 0, got {x}")))
    }
}

fn probability(family: &'static str, name: &str, x: f64) -> Result<(), DistError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(invalid(family, format!("{name} must lie in [0, 1], got {x}")))
    }
}

impl Distribution {
    /// Validates `family`. Categorical weights are normalised to sum to one.
    pub fn new(family: Family) -> Result<Self, DistError> {
        let name = family.name();
        let family = match family {
            Family::Uniform { low, high } => {
                finite(name, "low", low)?;
                finite(name, "high", high)?;
                if low >= high || !(high - low).is_finite() {
                    return Err(invalid(name, format!("requires low < high, got [{low}, {high}]")));
                }
                Family::Uniform { low, high }
            }
            Family::Normal { mean, std } => {
                finite(name, "mean", mean)?;
                positive(name, "std", std)?;
                Family::Normal { mean, std }
            }
            Family::LogNormal { mu, sigma } => {
                finite(name, "mu", mu)?;
                positive(name, "sigma", sigma)?;
                Family::LogNormal { mu, sigma }
            }
            Family::Beta { alpha, beta } => {
                positive(name, "alpha", alpha)?;
                positive(name, "beta", beta)?;
                Family::Beta { alpha, beta }
            }
            Family::Gamma { shape, rate } => {
                positive(name, "shape", shape)?;
                positive(name, "rate", rate)?;
                Family::Gamma { shape, rate }
            }
            Family::Bernoulli { p } => {
                probability(name, "p", p)?;
                Family::Bernoulli { p }
            }
            Family::Binomial { n, p } => {
                probability(name, "p", p)?;
                if n > i64::MAX as u64 {
                    return Err(invalid(name, "n exceeds the integer value range"));
                }
                Family::Binomial { n, p }
            }
            Family::Categorical { probs } => {
                if probs.is_empty() {
                    return Err(invalid(name, "probs must be non-empty"));
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(invalid(name, "probs must be finite and non-negative"));
                }
                let total: f64 = probs.iter().sum();
                if !(total > 0.0) || !total.is_finite() {
                    return Err(invalid(name, "probs must have a positive finite sum"));
                }
                // Weights that already sum to one are kept verbatim so that
                // serialising and re-reading is bit-exact.
                if (total - 1.0).abs() <= NORMALISED_TOL {
                    return Ok(Distribution(Family::Categorical { probs }));
                }
                let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
                let renorm: f64 = probs.iter().sum();
                if (renorm - 1.0).abs() > CATEGORICAL_SUM_TOL {
                    return Err(invalid(name, format!("probs sum to {renorm} after normalisation")));
                }
                Family::Categorical { probs }
            }
            Family::Poisson { rate } => {
                positive(name, "rate", rate)?;
                Family::Poisson { rate }
            }
        };
        Ok(Distribution(family))
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self, DistError> {
        Self::new(Family::Uniform { low, high })
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self, DistError> {
        Self::new(Family::Normal { mean, std })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self, DistError> {
        Self::new(Family::LogNormal { mu, sigma })
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self, DistError> {
        Self::new(Family::Beta { alpha, beta })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self, DistError> {
        Self::new(Family::Gamma { shape, rate })
    }

    pub fn bernoulli(p: f64) -> Result<Self, DistError> {
        Self::new(Family::Bernoulli { p })
    }

    pub fn binomial(n: u64, p: f64) -> Result<Self, DistError> {
        Self::new(Family::Binomial { n, p })
    }

    pub fn categorical(probs: Vec<f64>) -> Result<Self, DistError> {
        Self::new(Family::Categorical { probs })
    }

    pub fn poisson(rate: f64) -> Result<Self, DistError> {
        Self::new(Family::Poisson { rate })
    }

    pub fn family(&self) -> &Family {
        &self.0
    }

    pub fn family_name(&self) -> &'static str {
        self.0.name()
    }

    /// True when every value in the support is strictly positive.
    pub fn has_positive_support(&self) -> bool {
        match &self.0 {
            Family::Uniform { low, .. } => *low >= 0.0,
            Family::LogNormal { .. } | Family::Beta { .. } | Family::Gamma { .. } => true,
            _ => false,
        }
    }

    /// Log density (continuous families) or log mass (discrete families).
    ///
    /// Values outside the support score `-inf`; a value of the wrong kind is a
    /// [`DistError::TypeMismatch`]. Continuous families accept integer values.
    pub fn log_prob(&self, value: &Value) -> Result<f64, DistError> {
        let lp = match &self.0 {
            Family::Uniform { low, high } => {
                let x = self.real_arg(value)?;
                if x >= *low && x <= *high {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Normal { mean, std } => {
                let x = self.real_arg(value)?;
                let z = (x - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * (2.0 * PI).ln()
            }
            Family::LogNormal { mu, sigma } => {
                let x = self.real_arg(value)?;
                if x > 0.0 {
                    let z = (x.ln() - mu) / sigma;
                    -0.5 * z * z - x.ln() - sigma.ln() - 0.5 * (2.0 * PI).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Beta { alpha, beta } => {
                let x = self.real_arg(value)?;
                if x > 0.0 && x < 1.0 {
                    (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_beta(*alpha, *beta)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Gamma { shape, rate } => {
                let x = self.real_arg(value)?;
                if x > 0.0 {
                    shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * x.ln() - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Bernoulli { p } => match value {
                Value::Bool(b) => log_or_zero(if *b { *p } else { 1.0 - p }),
                other => return Err(self.mismatch(other)),
            },
            Family::Binomial { n, p } => {
                let k = self.int_arg(value)?;
                if k < 0 || k as u64 > *n {
                    f64::NEG_INFINITY
                } else {
                    let k = k as u64;
                    let ln_choose =
                        ln_factorial(*n) - ln_factorial(k) - ln_factorial(n - k);
                    ln_choose + xlogy(k as f64, *p) + xlogy((n - k) as f64, 1.0 - p)
                }
            }
            Family::Categorical { probs } => {
                let k = self.int_arg(value)?;
                if k < 0 || k as usize >= probs.len() {
                    f64::NEG_INFINITY
                } else {
                    log_or_zero(probs[k as usize])
                }
            }
            Family::Poisson { rate } => {
                let k = self.int_arg(value)?;
                if k < 0 {
                    f64::NEG_INFINITY
                } else {
                    k as f64 * rate.ln() - rate - ln_factorial(k as u64)
                }
            }
        };
        // Only the boundary cases of the formulas above can produce NaN.
        Ok(if lp.is_nan() { f64::NEG_INFINITY } else { lp })
    }

    /// Draws one value. The result always lies in the support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match &self.0 {
            Family::Uniform { low, high } => {
                let x = rng.random_range(*low..*high);
                Value::Real(x)
            }
            Family::Normal { mean, std } => {
                let d = rand_distr::Normal::new(*mean, *std).expect("validated");
                Value::Real(d.sample(rng))
            }
            Family::LogNormal { mu, sigma } => {
                let d = rand_distr::LogNormal::new(*mu, *sigma).expect("validated");
                Value::Real(d.sample(rng).max(f64::MIN_POSITIVE))
            }
            Family::Beta { alpha, beta } => {
                let d = rand_distr::Beta::new(*alpha, *beta).expect("validated");
                // Underflow can land exactly on the open boundary.
                let x: f64 = d.sample(rng);
                Value::Real(x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
            }
            Family::Gamma { shape, rate } => {
                let d = rand_distr::Gamma::new(*shape, 1.0 / rate).expect("validated");
                Value::Real(d.sample(rng).max(f64::MIN_POSITIVE))
            }
            Family::Bernoulli { p } => Value::Bool(rng.random_bool(*p)),
            Family::Binomial { n, p } => {
                let d = rand_distr::Binomial::new(*n, *p).expect("validated");
                Value::Int(d.sample(rng) as i64)
            }
            Family::Categorical { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last_positive = 0;
                for (i, p) in probs.iter().enumerate() {
                    if *p > 0.0 {
                        last_positive = i;
                        acc += p;
                        if u < acc {
                            return Value::Int(i as i64);
                        }
                    }
                }
                Value::Int(last_positive as i64)
            }
            Family::Poisson { rate } => {
                let d = rand_distr::Poisson::new(*rate).expect("validated");
                let k: f64 = d.sample(rng);
                Value::Int(k as i64)
            }
        }
    }

    /// Mean and variance of the distribution, where defined for scalars.
    pub fn moments(&self) -> (f64, f64) {
        match &self.0 {
            Family::Uniform { low, high } => ((low + high) / 2.0, (high - low).powi(2) / 12.0),
            Family::Normal { mean, std } => (*mean, std * std),
            Family::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                ((mu + s2 / 2.0).exp(), (s2.exp() - 1.0) * (2.0 * mu + s2).exp())
            }
            Family::Beta { alpha, beta } => {
                let s = alpha + beta;
                (alpha / s, alpha * beta / (s * s * (s + 1.0)))
            }
            Family::Gamma { shape, rate } => (shape / rate, shape / (rate * rate)),
            Family::Bernoulli { p } => (*p, p * (1.0 - p)),
            Family::Binomial { n, p } => (*n as f64 * p, *n as f64 * p * (1.0 - p)),
            Family::Categorical { probs } => {
                let mean: f64 = probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
                let var = probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i as f64 - mean).powi(2) * p)
                    .sum();
                (mean, var)
            }
            Family::Poisson { rate } => (*rate, *rate),
        }
    }

    fn mismatch(&self, value: &Value) -> DistError {
        DistError::TypeMismatch {
            family: self.family_name(),
            kind: value.kind(),
        }
    }

    fn real_arg(&self, value: &Value) -> Result<f64, DistError> {
        match value {
            Value::Real(x) => Ok(*x),
            Value::Int(i) => Ok(*i as f64),
            other => Err(self.mismatch(other)),
        }
    }

    fn int_arg(&self, value: &Value) -> Result<i64, DistError> {
        match value {
            Value::Int(i) => Ok(*i),
            other => Err(self.mismatch(other)),
        }
    }
}

fn log_or_zero(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `x * ln(y)` with the convention `0 * ln(0) = 0`.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * log_or_zero(y)
    }
}

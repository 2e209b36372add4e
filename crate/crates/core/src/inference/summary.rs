//! Weighted posterior summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Engine, InferenceError, Posterior};

/// Weights scaled so the largest is one; `-inf` log-weights map to zero.
fn relative_weights(posterior: &Posterior) -> Result<Vec<f64>, InferenceError> {
    let max = posterior
        .particles
        .iter()
        .map(|p| p.log_weight)
        .filter(|w| w.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(InferenceError::Degenerate("no particle has finite weight".into()));
    }
    Ok(posterior
        .particles
        .iter()
        .map(|p| if p.log_weight.is_finite() { (p.log_weight - max).exp() } else { 0.0 })
        .collect())
}

/// Weights normalised to sum to one; `-inf` log-weights map to zero.
pub fn normalized_weights(posterior: &Posterior) -> Result<Vec<f64>, InferenceError> {
    let raw = relative_weights(posterior)?;
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Effective sample size `(sum w)^2 / sum w^2`. Computed on weights relative
/// to the largest, so `n` equal weights give exactly `n`.
pub fn ess(posterior: &Posterior) -> Result<f64, InferenceError> {
    let w = relative_weights(posterior)?;
    let sum: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|x| x * x).sum();
    Ok(sum * sum / sq)
}

fn weighted_values(posterior: &Posterior, label: &str) -> Result<Vec<(f64, f64)>, InferenceError> {
    let weights = normalized_weights(posterior)?;
    let mut out = Vec::with_capacity(weights.len());
    for (p, w) in posterior.particles.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let v = p
            .latents
            .get(label)
            .or_else(|| p.outputs.get(label))
            .and_then(|v| v.as_f64())
            .ok_or_else(|| InferenceError::MissingLabel(label.to_owned()))?;
        out.push((v, w));
    }
    Ok(out)
}

/// Weighted mean of a latent (or scalar output) across particles.
pub fn posterior_mean(posterior: &Posterior, label: &str) -> Result<f64, InferenceError> {
    let vals = weighted_values(posterior, label)?;
    let total: f64 = vals.iter().map(|(_, w)| w).sum();
    Ok(vals.iter().map(|(v, w)| v * w).sum::<f64>() / total)
}

/// Value at the first particle, in ascending value order, whose cumulative
/// normalised weight reaches `q`.
pub fn posterior_quantile(posterior: &Posterior, label: &str, q: f64) -> Result<f64, InferenceError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(InferenceError::InvalidArgument(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let mut vals = weighted_values(posterior, label)?;
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = vals.iter().map(|(_, w)| w).sum();
    let mut acc = 0.0;
    for (v, w) in &vals {
        acc += w / total;
        if acc >= q - 1e-12 {
            return Ok(*v);
        }
    }
    Ok(vals.last().map(|(v, _)| *v).unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSummary {
    pub mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub engine: Engine,
    pub n: usize,
    pub ess: f64,
    pub latents: BTreeMap<String, LatentSummary>,
}

/// Mean and 5/50/95% quantiles of every numeric latent.
pub fn summarize(posterior: &Posterior) -> Result<PosteriorSummary, InferenceError> {
    let mut latents = BTreeMap::new();
    for label in &posterior.latent_labels {
        let numeric = posterior
            .particles
            .iter()
            .all(|p| p.latents.get(label).is_some_and(|v| v.as_f64().is_some()));
        if !numeric {
            continue;
        }
        latents.insert(
            label.clone(),
            LatentSummary {
                mean: posterior_mean(posterior, label)?,
                q05: posterior_quantile(posterior, label, 0.05)?,
                q50: posterior_quantile(posterior, label, 0.5)?,
                q95: posterior_quantile(posterior, label, 0.95)?,
            },
        );
    }
    Ok(PosteriorSummary {
        engine: posterior.engine,
        n: posterior.len(),
        ess: ess(posterior)?,
        latents,
    })
}

//! Intervention-policy scanning under an outcome constraint.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{derive_seed, run_model, ExecutionMode, Model};
use crate::models::{InterventionPolicy, ModelConfig, OutcomeConstraint};
use crate::trace::Address;
use crate::value::Value;

use super::{icu_peak, normalized_weights, output_f64, InferenceError, Posterior};

/// A model that can be re-run under a different intervention policy.
pub trait PolicyModel: Model + Sized {
    fn with_policy(&self, policy: &InterventionPolicy) -> Self;
}

impl PolicyModel for ModelConfig {
    fn with_policy(&self, policy: &InterventionPolicy) -> Self {
        ModelConfig::with_policy(self, *policy)
    }
}

/// Where rollout latents come from.
#[derive(Debug, Clone, Copy)]
pub enum LatentSource<'a> {
    Prior,
    /// Resampled in proportion to particle weight.
    Posterior(&'a Posterior),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub policy: InterventionPolicy,
    pub p_constraint: f64,
    pub mean_total_cases: f64,
    pub n_rollouts: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyScanResult {
    pub rows: Vec<ScanRow>,
}

impl PolicyScanResult {
    /// Sorts by `p_constraint` descending, then mean cases ascending, then
    /// policy in lexicographic order.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            b.p_constraint
                .total_cmp(&a.p_constraint)
                .then(a.mean_total_cases.total_cmp(&b.mean_total_cases))
                .then(a.policy.lexicographic_cmp(&b.policy))
        });
    }
}

fn resample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Estimates, for each policy, the probability that the ICU constraint holds
/// and the mean total cases over `m_rollouts` simulations.
///
/// Rollout `r` uses the same run seed and the same resampled particle for
/// every policy, so policies are compared under common random numbers.
pub fn scan_policies<M: PolicyModel>(
    model: &M,
    grid: &[InterventionPolicy],
    source: LatentSource<'_>,
    m_rollouts: usize,
    constraint: &OutcomeConstraint,
    seed: u64,
) -> Result<PolicyScanResult, InferenceError> {
    if grid.is_empty() {
        return Err(InferenceError::InvalidArgument("policy grid is empty".into()));
    }
    if m_rollouts == 0 {
        return Err(InferenceError::InvalidArgument("m_rollouts must be at least 1".into()));
    }
    let bindings: Vec<Option<HashMap<Address, Value>>> = match source {
        LatentSource::Prior => vec![None; m_rollouts],
        LatentSource::Posterior(post) => {
            let weights = normalized_weights(post)?;
            (0..m_rollouts as u64)
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ 0x5CA7_7E55, r));
                    let idx = resample_index(&weights, rng.random());
                    Some(
                        post.particles[idx]
                            .latents
                            .iter()
                            .map(|(l, v)| (Address::new(l.clone(), 0), v.clone()))
                            .collect(),
                    )
                })
                .collect()
        }
    };

    let mut result = PolicyScanResult::default();
    for policy in grid {
        let variant = model.with_policy(policy);
        let outcomes: Vec<Result<(bool, f64), InferenceError>> = (0..m_rollouts)
            .into_par_iter()
            .map(|r| {
                let mode = match &bindings[r] {
                    None => ExecutionMode::Record,
                    Some(b) => ExecutionMode::redirect(b.clone()),
                };
                let t = run_model(&variant, mode, derive_seed(seed, r as u64))?;
                Ok((icu_peak(&t)? <= constraint.icu_capacity, output_f64(&t, "total_cases")?))
            })
            .collect();
        let mut ok = 0u64;
        let mut cases = 0.0;
        for o in outcomes {
            let (satisfied, total) = o?;
            ok += satisfied as u64;
            cases += total;
        }
        result.rows.push(ScanRow {
            policy: *policy,
            p_constraint: ok as f64 / m_rollouts as f64,
            mean_total_cases: cases / m_rollouts as f64,
            n_rollouts: m_rollouts as u64,
        });
    }
    result.sort();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(day: u32, c: f64, p: f64, mean: f64) -> ScanRow {
        ScanRow {
            policy: InterventionPolicy::new(day, c, 0.0),
            p_constraint: p,
            mean_total_cases: mean,
            n_rollouts: 1,
        }
    }

    #[test]
    fn ranking_tie_breaks() {
        let mut r = PolicyScanResult {
            rows: vec![row(3, 0.5, 0.9, 10.0), row(1, 0.5, 0.9, 10.0), row(0, 0.0, 0.9, 5.0), row(0, 0.0, 1.0, 50.0)],
        };
        r.sort();
        let order: Vec<_> = r.rows.iter().map(|x| (x.policy.start_day, x.mean_total_cases)).collect();
        assert_eq!(order, vec![(0, 50.0), (0, 5.0), (1, 10.0), (3, 10.0)]);
    }

    #[test]
    fn resampling_skips_zero_weights() {
        assert_eq!(resample_index(&[0.0, 1.0, 0.0], 0.99), 1);
        assert_eq!(resample_index(&[0.5, 0.5], 0.25), 0);
        assert_eq!(resample_index(&[0.5, 0.5], 0.75), 1);
    }

    #[test]
    fn empty_grid_rejected() {
        let m = ModelConfig::Sir(crate::models::EpiSettings::sir(10, 1, 5));
        let c = OutcomeConstraint { icu_capacity: 1 };
        assert!(scan_policies(&m, &[], LatentSource::Prior, 5, &c, 0).is_err());
        assert!(scan_policies(&m, &[InterventionPolicy::default()], LatentSource::Prior, 0, &c, 0).is_err());
    }
}

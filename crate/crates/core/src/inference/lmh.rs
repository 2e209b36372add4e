//! Single-site lightweight Metropolis–Hastings over traces.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::{derive_seed, run_model, run_model_detailed, ExecutionMode, IncompatibleBinding, Model};
use crate::trace::{Address, Trace};
use crate::value::Value;

use super::{labels_for, particle_from_trace, Engine, InferenceError, Posterior};

#[derive(Debug, Clone, Copy)]
pub struct LmhOptions {
    /// Record-mode attempts allowed to find a trace with finite log-joint.
    pub init_attempts: u64,
}

impl Default for LmhOptions {
    fn default() -> Self {
        Self { init_attempts: 1000 }
    }
}

/// Log acceptance ratio of a single-site move from `old` to `new`.
///
/// The proposal redraws the value at `site` from its prior, so the forward
/// and reverse proposal densities are the site's prior log-probabilities
/// under the proposed and old values. Entries freshly drawn in `new` and old
/// entries whose values were not reused account for structural changes.
fn log_acceptance(old: &Trace, new: &Trace, fresh: &[Address], site: &Address, site_old_lp: f64, site_new_lp: f64) -> f64 {
    let fresh: HashSet<&Address> = fresh.iter().filter(|a| *a != site).collect();
    let reused: HashSet<&Address> = new
        .samples()
        .map(|e| &e.address)
        .filter(|a| !fresh.contains(a))
        .collect();
    let ll_fresh: f64 = new
        .samples()
        .filter(|e| fresh.contains(&e.address))
        .map(|e| e.log_prob)
        .sum();
    let ll_stale: f64 = old
        .samples()
        .filter(|e| &e.address != site && !reused.contains(&e.address))
        .map(|e| e.log_prob)
        .sum();
    let n_old = old.num_samples() as f64;
    let n_new = new.num_samples() as f64;
    new.log_joint() - old.log_joint() + n_old.ln() - n_new.ln() + ll_stale - ll_fresh + site_old_lp - site_new_lp
}

/// Runs a single chain for `n_steps` steps and returns the states after
/// `burn_in` as equally weighted particles.
pub fn run_lmh<M: Model + ?Sized>(
    model: &M,
    n_steps: usize,
    burn_in: usize,
    seed: u64,
    options: LmhOptions,
) -> Result<Posterior, InferenceError> {
    if burn_in >= n_steps {
        return Err(InferenceError::InvalidArgument(format!(
            "burn_in ({burn_in}) must be smaller than n_steps ({n_steps})"
        )));
    }
    let mut current = None;
    for attempt in 0..options.init_attempts {
        let t = run_model(model, ExecutionMode::Record, derive_seed(seed, attempt))?;
        if t.log_joint().is_finite() {
            current = Some(t);
            break;
        }
    }
    let mut current = current.ok_or(InferenceError::Initialization {
        attempts: options.init_attempts,
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let mut particles = Vec::with_capacity(n_steps - burn_in);
    let labels = labels_for(model, &current);
    let mut all_labels = labels.clone();

    for step in 0..n_steps {
        let n_sites = current.num_samples();
        if n_sites > 0 {
            let pick = rng.random_range(0..n_sites);
            let site_entry = current.samples().nth(pick).expect("index in range").clone();
            let proposed = site_entry.dist.sample(&mut rng);
            let run_seed: u64 = rng.random();
            let u: f64 = rng.random();

            let mut bindings: HashMap<Address, Value> = current
                .samples()
                .map(|e| (e.address.clone(), e.value.clone()))
                .collect();
            bindings.insert(site_entry.address.clone(), proposed.clone());
            let mode = ExecutionMode::Redirect {
                bindings,
                on_incompatible: IncompatibleBinding::Resample,
            };
            let exec = run_model_detailed(model, mode, run_seed)?;
            if exec.trace.log_joint().is_finite() {
                let site_new_lp = site_entry.dist.log_prob(&proposed).unwrap_or(f64::NEG_INFINITY);
                let log_alpha = log_acceptance(
                    &current,
                    &exec.trace,
                    &exec.fresh,
                    &site_entry.address,
                    site_entry.log_prob,
                    site_new_lp,
                );
                if u.ln() < log_alpha {
                    current = exec.trace;
                }
            }
        }
        if step >= burn_in {
            let labels = labels_for(model, &current);
            for l in &labels {
                if !all_labels.contains(l) {
                    all_labels.push(l.clone());
                }
            }
            particles.push(particle_from_trace(&current, &labels, 0.0));
        }
    }
    if let Some(declared) = model.latent_labels() {
        all_labels = declared;
    }
    Ok(Posterior {
        engine: Engine::Lmh,
        seed,
        latent_labels: all_labels,
        particles,
        proposals: Some(n_steps as u64),
        traces: None,
    })
}

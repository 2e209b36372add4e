use rayon::prelude::*;

use crate::context::{derive_seed, run_model, ExecutionMode, Model};
use crate::trace::Trace;

use super::{merge_particles, reduce_trace, Engine, InferenceError, Posterior};

/// Runs `n` independent Record-mode executions with seeds derived from `seed`.
/// The result is ordered by particle index regardless of scheduling.
pub(crate) fn run_batch<M: Model + ?Sized>(
    model: &M,
    n: usize,
    seed: u64,
) -> Result<Vec<Trace>, InferenceError> {
    let results: Vec<_> = (0..n as u64)
        .into_par_iter()
        .map(|i| run_model(model, ExecutionMode::Record, derive_seed(seed, i)))
        .collect();
    results
        .into_iter()
        .map(|r| r.map_err(InferenceError::from))
        .collect()
}

/// Importance sampling with the prior as proposal: each particle is weighted
/// by its trace log-likelihood.
pub fn run_is<M: Model + ?Sized>(model: &M, n: usize, seed: u64) -> Result<Posterior, InferenceError> {
    if n == 0 {
        return Err(InferenceError::InvalidArgument("n_particles must be at least 1".into()));
    }
    // Traces are reduced to particles as they finish, so memory scales
    // with the particle count rather than with trace length.
    let declared = model.latent_labels();
    let results: Vec<_> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            run_model(model, ExecutionMode::Record, derive_seed(seed, i))
                .map(|t| reduce_trace(declared.as_deref(), &t, t.log_likelihood))
        })
        .collect();
    let items = results
        .into_iter()
        .map(|r| r.map_err(InferenceError::from))
        .collect::<Result<Vec<_>, _>>()?;
    if items.iter().all(|(_, p)| p.log_weight == f64::NEG_INFINITY) {
        return Err(InferenceError::Degenerate(format!(
            "all {n} particles have zero likelihood; the data are impossible under the prior"
        )));
    }
    let (latent_labels, particles) = merge_particles(declared, items);
    Ok(Posterior {
        engine: Engine::Is,
        seed,
        latent_labels,
        particles,
        proposals: Some(n as u64),
        traces: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{Context, ExecError};
    use crate::dist::Distribution;

    #[test]
    fn unconditioned_model_has_zero_weights() {
        let m = |ctx: &mut Context| ctx.sample("x", &Distribution::normal(0.0, 1.0).unwrap()).map(|_| ());
        let post = run_is(&m, 100, 1).unwrap();
        assert!(post.particles.iter().all(|p| p.log_weight == 0.0));
        assert_eq!(post.latent_labels, vec!["x".to_string()]);
    }

    #[test]
    fn impossible_data_is_degenerate() {
        let m = |ctx: &mut Context| -> Result<(), ExecError> {
            let x = ctx.sample_real("x", &Distribution::uniform(0.0, 1.0).unwrap())?;
            ctx.observe("y", &Distribution::uniform(0.0, 1.0 + x).unwrap(), 5.0)
        };
        assert!(matches!(run_is(&m, 50, 1), Err(InferenceError::Degenerate(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let m = |ctx: &mut Context| -> Result<(), ExecError> {
            let x = ctx.sample_real("x", &Distribution::normal(0.0, 1.0).unwrap())?;
            ctx.observe("y", &Distribution::normal(x, 1.0).unwrap(), 0.3)
        };
        assert_eq!(run_is(&m, 500, 9).unwrap(), run_is(&m, 500, 9).unwrap());
        assert_ne!(run_is(&m, 500, 9).unwrap(), run_is(&m, 500, 10).unwrap());
    }

    #[test]
    fn zero_particles_rejected() {
        let m = |_: &mut Context| Ok(());
        assert!(matches!(run_is(&m, 0, 1), Err(InferenceError::InvalidArgument(_))));
    }
}

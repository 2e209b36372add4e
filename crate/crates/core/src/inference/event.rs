use crate::context::Model;
use crate::models::OutcomeConstraint;

use super::is::run_batch;
use super::{collect_particles, icu_peak, Engine, InferenceError, Posterior};

/// Conditions on the outcome event "ICU occupancy never exceeds capacity"
/// with hard indicator weights (0 or `-inf`) over `n` prior runs. Uses the
/// same per-particle seeds as [`super::run_is`] and keeps the full traces.
pub fn run_conditioned_event<M: Model + ?Sized>(
    model: &M,
    constraint: &OutcomeConstraint,
    n: usize,
    seed: u64,
) -> Result<Posterior, InferenceError> {
    if n == 0 {
        return Err(InferenceError::InvalidArgument("n_particles must be at least 1".into()));
    }
    let traces = run_batch(model, n, seed)?;
    let mut weighted = Vec::with_capacity(n);
    let mut min_peak = u64::MAX;
    for t in traces {
        let peak = icu_peak(&t)?;
        min_peak = min_peak.min(peak);
        let w = if peak <= constraint.icu_capacity { 0.0 } else { f64::NEG_INFINITY };
        weighted.push((t, w));
    }
    if weighted.iter().all(|(_, w)| *w == f64::NEG_INFINITY) {
        return Err(InferenceError::EventImpossible {
            proposals: n as u64,
            min_icu_peak: min_peak,
        });
    }
    let (latent_labels, particles) = collect_particles(model, &weighted);
    Ok(Posterior {
        engine: Engine::Event,
        seed,
        latent_labels,
        particles,
        proposals: Some(n as u64),
        traces: Some(weighted.into_iter().map(|(t, _)| t).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{EpiSettings, ModelConfig};

    #[test]
    fn impossible_event_errors() {
        let mut s = EpiSettings::sir(100, 5, 10);
        s.icu.rho = 1.0;
        let m = ModelConfig::Sir(s);
        match run_conditioned_event(&m, &OutcomeConstraint { icu_capacity: 0 }, 20, 1) {
            Err(InferenceError::EventImpossible { min_icu_peak, .. }) => assert!(min_icu_peak >= 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_icu_output() {
        let m = |_: &mut crate::context::Context| Ok(());
        assert!(matches!(
            run_conditioned_event(&m, &OutcomeConstraint { icu_capacity: 1 }, 3, 1),
            Err(InferenceError::MissingOutput(_))
        ));
    }
}

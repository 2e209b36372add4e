//! Rejection ABC on low-dimensional epidemic-curve summaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{derive_seed, run_model, ExecutionMode, Model};
use crate::models::{peak_of, EpidemicPath, ObservationSeries};
use crate::trace::Trace;

use super::{collect_particles, output_f64, Engine, InferenceError, Posterior};

/// `(total_cases, peak_day, peak_height)` of a daily new-infection series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub total_cases: f64,
    pub peak_day: f64,
    pub peak_height: f64,
}

impl SummaryStats {
    pub fn as_array(&self) -> [f64; 3] {
        [self.total_cases, self.peak_day, self.peak_height]
    }

    pub fn from_path(path: &EpidemicPath) -> Self {
        let (day, height) = path.peak();
        Self {
            total_cases: path.total_cases() as f64,
            peak_day: day as f64,
            peak_height: height as f64,
        }
    }

    /// Observed counts read as the new-infection series.
    pub fn from_observations(data: &ObservationSeries) -> Self {
        let (day, height) = peak_of(data.iter().map(|o| (o.day as u64, o.count)));
        Self {
            total_cases: data.iter().map(|o| o.count as f64).sum(),
            peak_day: day as f64,
            peak_height: height as f64,
        }
    }

    /// Reads the summary outputs a model run recorded.
    pub fn from_trace(trace: &Trace) -> Result<Self, InferenceError> {
        Ok(Self {
            total_cases: output_f64(trace, "total_cases")?,
            peak_day: output_f64(trace, "peak_day")?,
            peak_height: output_f64(trace, "peak_height")?,
        })
    }
}

/// Euclidean distance with each component scaled by `max(|observed|, 1)`.
pub fn abc_distance(simulated: &SummaryStats, observed: &SummaryStats) -> f64 {
    simulated
        .as_array()
        .iter()
        .zip(observed.as_array())
        .map(|(s, o)| {
            let d = (s - o) / o.abs().max(1.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct AbcOptions {
    /// Hard cap on proposals.
    pub max_proposals: u64,
    /// Proposals after which a rate below `min_acceptance_rate` aborts.
    pub rate_check_after: u64,
    pub min_acceptance_rate: f64,
    pub batch_size: u64,
}

impl Default for AbcOptions {
    fn default() -> Self {
        Self {
            max_proposals: 10_000_000,
            rate_check_after: 100_000,
            min_acceptance_rate: 1e-4,
            batch_size: 4096,
        }
    }
}

/// Rejection ABC: prior draws whose simulated summaries fall within
/// `tolerance` of the observed summaries. Observe statements in the model are
/// ignored. Returns the first `n` accepted proposals in proposal order.
pub fn run_abc<M: Model + ?Sized>(
    model: &M,
    data: &ObservationSeries,
    n: usize,
    tolerance: f64,
    seed: u64,
    options: AbcOptions,
) -> Result<Posterior, InferenceError> {
    if data.is_empty() {
        return Err(InferenceError::InvalidArgument("ABC requires non-empty data".into()));
    }
    if !(tolerance >= 0.0) {
        return Err(InferenceError::InvalidArgument(format!("tolerance must be >= 0, got {tolerance}")));
    }
    if n == 0 {
        return Err(InferenceError::InvalidArgument("n_particles must be at least 1".into()));
    }
    let observed = SummaryStats::from_observations(data);
    let mut accepted: Vec<(Trace, f64)> = Vec::with_capacity(n);
    let mut proposals = 0u64;
    let mut min_distance = f64::INFINITY;

    while accepted.len() < n {
        if proposals >= options.max_proposals
            || (proposals >= options.rate_check_after
                && (accepted.len() as f64) < options.min_acceptance_rate * proposals as f64)
        {
            return Err(InferenceError::ToleranceTooTight {
                proposals,
                accepted: accepted.len() as u64,
                min_distance,
            });
        }
        let end = (proposals + options.batch_size).min(options.max_proposals);
        let batch: Vec<_> = (proposals..end)
            .into_par_iter()
            .map(|i| -> Result<(Trace, f64), InferenceError> {
                let t = run_model(model, ExecutionMode::Record, derive_seed(seed, i))?;
                let d = abc_distance(&SummaryStats::from_trace(&t)?, &observed);
                Ok((t, d))
            })
            .collect();
        for r in batch {
            let (t, d) = r?;
            proposals += 1;
            min_distance = min_distance.min(d);
            if d <= tolerance {
                accepted.push((t, 0.0));
                if accepted.len() == n {
                    break;
                }
            }
        }
    }
    let (latent_labels, particles) = collect_particles(model, &accepted);
    Ok(Posterior {
        engine: Engine::Abc,
        seed,
        latent_labels,
        particles,
        proposals: Some(proposals),
        traces: None,
    })
}

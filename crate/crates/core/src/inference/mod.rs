//! Inference engines over traced models and the weighted posteriors they
//! return.

mod abc;
mod event;
mod export;
mod is;
mod lmh;
mod scan;
mod summary;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{singleton_labels, Model, RunError};
use crate::trace::{Address, Trace};
use crate::value::Value;

pub use abc::{abc_distance, run_abc, AbcOptions, SummaryStats};
pub use event::run_conditioned_event;
pub use export::{
    format_real, posterior_to_csv, read_posterior_csv, read_scan_csv, scan_to_csv, CsvError,
    POSTERIOR_FIXED_COLUMNS, SCAN_HEADER,
};
pub use is::run_is;
pub use lmh::{run_lmh, LmhOptions};
pub use scan::{scan_policies, LatentSource, PolicyModel, PolicyScanResult, ScanRow};
pub use summary::{ess, normalized_weights, posterior_mean, posterior_quantile, summarize, LatentSummary, PosteriorSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Is,
    Lmh,
    Abc,
    Event,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Is => "is",
            Engine::Lmh => "lmh",
            Engine::Abc => "abc",
            Engine::Event => "event",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub latents: BTreeMap<String, Value>,
    pub outputs: BTreeMap<String, Value>,
    /// Unnormalised; `-inf` means zero weight.
    pub log_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub engine: Engine,
    pub seed: u64,
    /// Latent labels in reporting order.
    pub latent_labels: Vec<String>,
    pub particles: Vec<Particle>,
    /// Number of model runs proposed (ABC and event conditioning).
    pub proposals: Option<u64>,
    /// Full traces of the particles, kept by event conditioning.
    pub traces: Option<Vec<Trace>>,
}

impl Posterior {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Names of scalar outputs present in any particle, sorted.
    pub fn scalar_output_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .particles
            .iter()
            .flat_map(|p| p.outputs.iter())
            .filter(|(_, v)| !matches!(v, Value::Vector(_)))
            .map(|(k, _)| k.clone())
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("degenerate posterior: {0}")]
    Degenerate(String),
    #[error("conditioning event never occurred in {proposals} runs (smallest ICU peak {min_icu_peak})")]
    EventImpossible { proposals: u64, min_icu_peak: u64 },
    #[error(
        "ABC tolerance too tight: {accepted} accepted of {proposals} proposals, smallest distance {min_distance}"
    )]
    ToleranceTooTight {
        proposals: u64,
        accepted: u64,
        min_distance: f64,
    },
    #[error("no initial trace with finite log-joint after {attempts} attempts")]
    Initialization { attempts: u64 },
    #[error("label {0:?} missing from posterior particles")]
    MissingLabel(String),
    #[error("model output {0:?} missing or not numeric")]
    MissingOutput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Builds a particle from a finished trace.
pub(crate) fn particle_from_trace(trace: &Trace, labels: &[String], log_weight: f64) -> Particle {
    let latents = labels
        .iter()
        .filter_map(|l| {
            trace
                .sample_at(&Address::new(l.clone(), 0))
                .map(|e| (l.clone(), e.value.clone()))
        })
        .collect();
    Particle {
        latents,
        outputs: trace.outputs.clone(),
        log_weight,
    }
}

/// Latent labels for one trace: declared by the model or inferred.
pub(crate) fn labels_for<M: Model + ?Sized>(model: &M, trace: &Trace) -> Vec<String> {
    model.latent_labels().unwrap_or_else(|| singleton_labels(trace))
}

/// Converts traces into particles, merging per-trace label sets in
/// first-appearance order.
pub(crate) fn collect_particles<M: Model + ?Sized>(
    model: &M,
    traces: &[(Trace, f64)],
) -> (Vec<String>, Vec<Particle>) {
    let declared = model.latent_labels();
    let items = traces
        .iter()
        .map(|(t, w)| reduce_trace(declared.as_deref(), t, *w))
        .collect();
    merge_particles(declared, items)
}

/// One trace's latent labels and particle.
pub(crate) fn reduce_trace(declared: Option<&[String]>, trace: &Trace, log_weight: f64) -> (Vec<String>, Particle) {
    let labels = match declared {
        Some(l) => l.to_vec(),
        None => singleton_labels(trace),
    };
    let particle = particle_from_trace(trace, &labels, log_weight);
    (labels, particle)
}

/// Reporting order: the declared labels, else every inferred label in
/// first-appearance order.
pub(crate) fn merge_particles(
    declared: Option<Vec<String>>,
    items: Vec<(Vec<String>, Particle)>,
) -> (Vec<String>, Vec<Particle>) {
    let mut all: Vec<String> = Vec::new();
    let particles = items
        .into_iter()
        .map(|(labels, p)| {
            if declared.is_none() {
                for l in labels {
                    if !all.contains(&l) {
                        all.push(l);
                    }
                }
            }
            p
        })
        .collect();
    (declared.unwrap_or(all), particles)
}

/// Reads a numeric scalar output.
pub(crate) fn output_f64(trace: &Trace, name: &str) -> Result<f64, InferenceError> {
    trace
        .outputs
        .get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| InferenceError::MissingOutput(name.to_owned()))
}

/// Peak of the `icu` output series.
pub(crate) fn icu_peak(trace: &Trace) -> Result<u64, InferenceError> {
    let series = trace
        .outputs
        .get("icu")
        .and_then(|v| match v {
            Value::Vector(xs) => Some(xs.clone()),
            other => other.as_f64().map(|x| vec![x]),
        })
        .ok_or_else(|| InferenceError::MissingOutput("icu".into()))?;
    Ok(series.iter().fold(0.0f64, |m, &x| m.max(x)).round() as u64)
}

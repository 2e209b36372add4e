//! Job configuration: one JSON document per job.
//!
//! Model keys sit at the top level (selected by `model`), next to the
//! `inference`, `scan`, `io` and `bridge` sections. Exactly one of `model`
//! and `bridge` must be present.

use std::path::PathBuf;

use epi_infer_core::models::{BetaBernoulli, EpiSettings, InterventionPolicy, ModelConfig, NormalNormal, ObservationSeries};
use serde::{Deserialize, Deserializer};

use crate::CliError;

const SECTIONS: [&str; 4] = ["inference", "scan", "io", "bridge"];

#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub source: JobSource,
    pub inference: Option<InferenceSection>,
    pub scan: Option<ScanSection>,
    pub io: IoSection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JobSource {
    Model(ModelConfig),
    Bridge(BridgeSection),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "engine", rename_all = "snake_case", deny_unknown_fields)]
pub enum InferenceSection {
    Is {
        n_particles: usize,
    },
    Lmh {
        n_steps: usize,
        burn_in: usize,
    },
    Abc {
        n_particles: usize,
        #[serde(deserialize_with = "extended_real")]
        tolerance: f64,
    },
    /// Conditioning on ICU occupancy staying within capacity.
    Event {
        n_particles: usize,
        /// Overrides the model's `icu.capacity`; required for bridge jobs.
        #[serde(default)]
        icu_capacity: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default)]
    pub policies: Option<Vec<InterventionPolicy>>,
    #[serde(default)]
    pub ranges: Option<PolicyRanges>,
    pub m_rollouts: usize,
    #[serde(default)]
    pub latent_source: LatentSourceKind,
    /// Overrides the model's `icu.capacity`; required for bridge jobs.
    #[serde(default)]
    pub icu_capacity: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSourceKind {
    #[default]
    Prior,
    /// Resample rollout latents from the posterior of the `inference` section.
    Posterior,
}

/// Per-field value lists; the grid is their Cartesian product. A field left
/// out takes its default (day 0, no reduction, no vaccination).
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRanges {
    #[serde(default)]
    pub start_day: Option<Axis>,
    #[serde(default)]
    pub contact_reduction: Option<Axis>,
    #[serde(default)]
    pub vaccination_coverage: Option<Axis>,
}

/// An explicit list, or `count` evenly spaced values from `start` to `stop`
/// inclusive.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Linear { start: f64, stop: f64, count: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::Values(v) => v.clone(),
            Axis::Linear { count: 0, .. } => Vec::new(),
            Axis::Linear { start, count: 1, .. } => vec![*start],
            Axis::Linear { start, stop, count } => (0..*count)
                .map(|i| {
                    if i + 1 == *count {
                        *stop
                    } else {
                        start + (stop - start) * i as f64 / (*count - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Simulations run by `simulate`.
    #[serde(default = "default_runs")]
    pub n_runs: usize,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_runs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSection {
    /// Address to accept one simulator connection on, e.g. `127.0.0.1:7878`.
    pub listen: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_frame")]
    pub max_frame_bytes: usize,
    /// Sent to the simulator in every `run` message.
    #[serde(default)]
    pub config: serde_json::Map<String, serde_json::Value>,
    /// Latents reported in posteriors; defaults to the keys of `config.priors`.
    #[serde(default)]
    pub latent_labels: Option<Vec<String>>,
}

fn default_timeout() -> f64 {
    300.0
}

fn default_max_frame() -> usize {
    epi_infer_core::bridge::MAX_FRAME_BYTES
}

impl BridgeSection {
    /// Observed data for ABC, read from `config.data` when present.
    pub fn data(&self) -> Result<Option<ObservationSeries>, CliError> {
        match self.config.get("data") {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::config("bridge.config.data", e.to_string(), None)),
        }
    }
}

/// Accepts a number or one of the strings `inf`, `+inf`, `infinity`.
fn extended_real<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(x) => Ok(x),
        Raw::Text(s) => match s.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            _ => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        },
    }
}

/// Line of the unique `"key":` occurrence in `text`, if exactly one exists.
fn locate(text: &str, field: &str) -> Option<usize> {
    let key = field.rsplit('.').find(|seg| !seg.is_empty() && !seg.starts_with('['))?;
    let key = key.split('[').next()?;
    let needle = format!("\"{key}\"");
    let mut hits = text.lines().enumerate().filter(|(_, line)| {
        line.match_indices(&needle)
            .any(|(i, _)| line[i + needle.len()..].trim_start().starts_with(':'))
    });
    let first = hits.next()?;
    hits.next().is_none().then_some(first.0 + 1)
}

fn typed<T: serde::de::DeserializeOwned>(
    text: &str,
    prefix: &str,
    value: serde_json::Value,
) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let field = match (prefix.is_empty(), inner.as_str()) {
            (true, ".") => "(document)".to_owned(),
            (true, p) => p.to_owned(),
            (false, ".") => prefix.to_owned(),
            (false, p) => format!("{prefix}.{p}"),
        };
        let line = locate(text, &field);
        CliError::config(field, e.into_inner().to_string(), line)
    })
}

/// Dispatches on `model` by hand so field errors keep their path.
fn parse_model(text: &str, mut map: serde_json::Map<String, serde_json::Value>) -> Result<ModelConfig, CliError> {
    let kind = map.remove("model");
    let body = serde_json::Value::Object(map);
    match kind.as_ref().and_then(|k| k.as_str()) {
        Some("sir") => Ok(ModelConfig::Sir(typed::<EpiSettings>(text, "", body)?)),
        Some("ibm") => Ok(ModelConfig::Ibm(typed::<EpiSettings>(text, "", body)?)),
        Some("normal_normal") => Ok(ModelConfig::NormalNormal(typed::<NormalNormal>(text, "", body)?)),
        Some("beta_bernoulli") => Ok(ModelConfig::BetaBernoulli(typed::<BetaBernoulli>(text, "", body)?)),
        _ => Err(CliError::config(
            "model",
            format!("unknown model {}; expected sir, ibm, normal_normal or beta_bernoulli", kind.unwrap_or_default()),
            locate(text, "model"),
        )),
    }
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let root: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::config("(document)", e.to_string(), Some(e.line())))?;
        let serde_json::Value::Object(mut map) = root else {
            return Err(CliError::config("(document)", "expected a JSON object", Some(1)));
        };
        let mut take = |key: &str| map.remove(key);
        let inference = take("inference");
        let scan = take("scan");
        let io = take("io").ok_or_else(|| CliError::config("io", "missing section (io.seed is required)", None))?;
        let bridge = take("bridge");
        debug_assert!(SECTIONS.iter().all(|s| !map.contains_key(*s)));

        let source = match (map.contains_key("model"), bridge) {
            (true, Some(_)) => {
                return Err(CliError::config(
                    "bridge",
                    "a job has either a built-in `model` or a `bridge`, not both",
                    locate(text, "bridge"),
                ))
            }
            (false, None) => {
                return Err(CliError::config("model", "missing: set `model` or a `bridge` section", None))
            }
            (true, None) => {
                let model = parse_model(text, map)?;
                model
                    .validate()
                    .map_err(|e| CliError::config(e.field.clone(), e.message.clone(), locate(text, &e.field)))?;
                JobSource::Model(model)
            }
            (false, Some(b)) => {
                if let Some(extra) = map.keys().next() {
                    return Err(CliError::config(
                        extra.clone(),
                        "model keys are not allowed in a bridge job",
                        locate(text, extra),
                    ));
                }
                let bridge: BridgeSection = typed(text, "bridge", b)?;
                if !(bridge.timeout_secs > 0.0 && bridge.timeout_secs.is_finite()) {
                    return Err(CliError::config(
                        "bridge.timeout_secs",
                        "must be a positive number of seconds",
                        locate(text, "timeout_secs"),
                    ));
                }
                JobSource::Bridge(bridge)
            }
        };

        let inference: Option<InferenceSection> = inference.map(|v| typed(text, "inference", v)).transpose()?;
        if let Some(inf) = &inference {
            inf.validate(text)?;
        }
        let scan: Option<ScanSection> = scan.map(|v| typed(text, "scan", v)).transpose()?;
        let io: IoSection = typed(text, "io", io)?;
        Ok(Self {
            source,
            inference,
            scan,
            io,
        })
    }
}

impl InferenceSection {
    fn validate(&self, text: &str) -> Result<(), CliError> {
        let bad = |field: &str, msg: &str| {
            Err(CliError::config(format!("inference.{field}"), msg, locate(text, field)))
        };
        match *self {
            InferenceSection::Is { n_particles }
            | InferenceSection::Event { n_particles, .. }
            | InferenceSection::Abc { n_particles, .. }
                if n_particles == 0 =>
            {
                bad("n_particles", "must be at least 1")
            }
            InferenceSection::Abc { tolerance, .. } if !(tolerance >= 0.0) => bad("tolerance", "must be >= 0"),
            InferenceSection::Lmh { n_steps, burn_in } if burn_in >= n_steps => {
                bad("burn_in", "must be smaller than n_steps")
            }
            _ => Ok(()),
        }
    }
}

impl ScanSection {
    /// The explicit list or the Cartesian product of the ranges.
    pub fn grid(&self) -> Result<Vec<InterventionPolicy>, CliError> {
        let grid = match (&self.policies, &self.ranges) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("scan", "give either `policies` or `ranges`, not both", None))
            }
            (Some(p), None) => p.clone(),
            (None, Some(r)) => {
                let axis = |a: &Option<Axis>| a.as_ref().map(Axis::values).unwrap_or_else(|| vec![0.0]);
                let days = axis(&r.start_day);
                for d in &days {
                    if !(*d >= 0.0 && d.fract() == 0.0 && *d <= u32::MAX as f64) {
                        return Err(CliError::config(
                            "scan.ranges.start_day",
                            format!("{d} is not a whole number of days"),
                            None,
                        ));
                    }
                }
                let mut grid = Vec::new();
                for &d in &days {
                    for &c in &axis(&r.contact_reduction) {
                        for &v in &axis(&r.vaccination_coverage) {
                            grid.push(InterventionPolicy::new(d as u32, c, v));
                        }
                    }
                }
                grid
            }
            (None, None) => Vec::new(),
        };
        if grid.is_empty() {
            return Err(CliError::config("scan", "policy grid is empty", None));
        }
        for p in &grid {
            if !(0.0..=1.0).contains(&p.contact_reduction) || !(0.0..=1.0).contains(&p.vaccination_coverage) {
                return Err(CliError::config(
                    "scan",
                    format!("policy {p:?} has a fraction outside [0, 1]"),
                    None,
                ));
            }
        }
        if self.m_rollouts == 0 {
            return Err(CliError::config("scan.m_rollouts", "must be at least 1", None));
        }
        Ok(grid)
    }
}

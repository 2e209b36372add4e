//! Addressed execution traces and their JSONL form.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::Distribution;
use crate::value::Value;

/// Site identifier: the user-supplied label plus the occurrence index of that
/// label within one execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Address {
    pub label: String,
    pub instance: u32,
}

impl Address {
    pub fn new(label: impl Into<String>, instance: u32) -> Self {
        Self {
            label: label.into(),
            instance,
        }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.label, self.instance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Sample,
    Observe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub kind: EntryKind,
    pub address: Address,
    pub dist: Distribution,
    pub value: Value,
    /// Finite for samples; may be `-inf` for observations.
    pub log_prob: f64,
}

impl TraceEntry {
    pub fn is_sample(&self) -> bool {
        self.kind == EntryKind::Sample
    }
}

/// The record of one model execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub entries: Vec<TraceEntry>,
    pub outputs: BTreeMap<String, Value>,
    pub log_prior: f64,
    pub log_likelihood: f64,
}

impl Trace {
    pub fn empty(seed: u64) -> Self {
        Self {
            seed,
            entries: Vec::new(),
            outputs: BTreeMap::new(),
            log_prior: 0.0,
            log_likelihood: 0.0,
        }
    }

    pub fn log_joint(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }

    pub fn samples(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| e.is_sample())
    }

    pub fn observations(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| !e.is_sample())
    }

    pub fn num_samples(&self) -> usize {
        self.samples().count()
    }

    pub fn sample_at(&self, address: &Address) -> Option<&TraceEntry> {
        self.samples().find(|e| &e.address == address)
    }

    pub fn addresses(&self) -> Vec<Address> {
        self.entries.iter().map(|e| e.address.clone()).collect()
    }

    /// Equality on value bit patterns and accumulators, used for replay checks.
    pub fn bit_eq(&self, other: &Trace) -> bool {
        self.seed == other.seed
            && self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.kind == b.kind
                    && a.address == b.address
                    && a.dist == b.dist
                    && a.value.bit_eq(&b.value)
                    && a.log_prob.to_bits() == b.log_prob.to_bits()
            })
            && self.outputs.len() == other.outputs.len()
            && self
                .outputs
                .iter()
                .zip(&other.outputs)
                .all(|((ka, va), (kb, vb))| ka == kb && va.bit_eq(vb))
            && self.log_prior.to_bits() == other.log_prior.to_bits()
            && self.log_likelihood.to_bits() == other.log_likelihood.to_bits()
    }

    /// Checks the structural invariants a well-formed trace satisfies.
    pub fn validate(&self) -> Result<(), TraceFormatError> {
        let mut seen = HashSet::new();
        let mut prior = 0.0;
        let mut lik = 0.0;
        for e in &self.entries {
            if !seen.insert(&e.address) {
                return Err(TraceFormatError::DuplicateAddress(e.address.clone()));
            }
            if !e.value.is_finite() {
                return Err(TraceFormatError::NonFiniteValue(e.address.clone()));
            }
            if e.log_prob.is_nan() {
                return Err(TraceFormatError::Inconsistent(format!("NaN log_prob at {}", e.address)));
            }
            match e.kind {
                EntryKind::Sample => {
                    if !e.log_prob.is_finite() {
                        return Err(TraceFormatError::Inconsistent(format!(
                            "sample at {} has non-finite log_prob",
                            e.address
                        )));
                    }
                    prior += e.log_prob;
                }
                EntryKind::Observe => lik += e.log_prob,
            }
        }
        if !rel_close(prior, self.log_prior) {
            return Err(TraceFormatError::Inconsistent(format!(
                "log_prior {} does not match entry sum {prior}",
                self.log_prior
            )));
        }
        if !(rel_close(lik, self.log_likelihood)
            || (lik == f64::NEG_INFINITY && self.log_likelihood == f64::NEG_INFINITY))
        {
            return Err(TraceFormatError::Inconsistent(format!(
                "log_likelihood {} does not match entry sum {lik}",
                self.log_likelihood
            )));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&TraceRecord::from(self)).expect("trace serialisation is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Trace, TraceFormatError> {
        let record: TraceRecord = serde_json::from_str(line)?;
        let trace = Trace::try_from(record)?;
        trace.validate()?;
        Ok(trace)
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Error)]
pub enum TraceFormatError {
    #[error("malformed trace JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate address {0}")]
    DuplicateAddress(Address),
    #[error("non-finite value at {0}")]
    NonFiniteValue(Address),
    #[error("inconsistent trace: {0}")]
    Inconsistent(String),
}

/// Parses a JSONL document, skipping blank lines.
pub fn read_jsonl(text: &str) -> Result<Vec<Trace>, (usize, TraceFormatError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| Trace::from_json_line(l).map_err(|e| (i + 1, e)))
        .collect()
}

pub fn write_jsonl<'a>(traces: impl IntoIterator<Item = &'a Trace>) -> String {
    let mut out = String::new();
    for t in traces {
        out.push_str(&t.to_json_line());
        out.push('\n');
    }
    out
}

/// Serde adapter for reals that may be infinite: `-inf`/`inf` become strings.
pub mod extended_real {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *x == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else if *x == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    struct ExtVisitor;

    impl Visitor<'_> for ExtVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a finite number or the string \"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "-inf" => Ok(f64::NEG_INFINITY),
                "inf" => Ok(f64::INFINITY),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtVisitor)
    }
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    kind: EntryKind,
    label: String,
    instance: u32,
    dist: Distribution,
    value: Value,
    #[serde(with = "extended_real")]
    log_prob: f64,
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    seed: u64,
    entries: Vec<EntryRecord>,
    outputs: BTreeMap<String, Value>,
    #[serde(with = "extended_real")]
    log_prior: f64,
    #[serde(with = "extended_real")]
    log_likelihood: f64,
}

impl From<&Trace> for TraceRecord {
    fn from(t: &Trace) -> Self {
        TraceRecord {
            seed: t.seed,
            entries: t
                .entries
                .iter()
                .map(|e| EntryRecord {
                    kind: e.kind,
                    label: e.address.label.clone(),
                    instance: e.address.instance,
                    dist: e.dist.clone(),
                    value: e.value.clone(),
                    log_prob: e.log_prob,
                })
                .collect(),
            outputs: t.outputs.clone(),
            log_prior: t.log_prior,
            log_likelihood: t.log_likelihood,
        }
    }
}

impl TryFrom<TraceRecord> for Trace {
    type Error = TraceFormatError;

    fn try_from(r: TraceRecord) -> Result<Self, TraceFormatError> {
        Ok(Trace {
            seed: r.seed,
            entries: r
                .entries
                .into_iter()
                .map(|e| TraceEntry {
                    kind: e.kind,
                    address: Address::new(e.label, e.instance),
                    dist: e.dist,
                    value: e.value,
                    log_prob: e.log_prob,
                })
                .collect(),
            outputs: r.outputs,
            log_prior: r.log_prior,
            log_likelihood: r.log_likelihood,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> Trace {
        let d = Distribution::bernoulli(0.5).unwrap();
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let mut t = Trace::empty(42);
        t.entries.push(TraceEntry {
            kind: EntryKind::Sample,
            address: Address::new("coin", 0),
            dist: d.clone(),
            value: Value::Bool(true),
            log_prob: 0.5f64.ln(),
        });
        t.entries.push(TraceEntry {
            kind: EntryKind::Observe,
            address: Address::new("y", 0),
            dist: u,
            value: Value::Real(2.0),
            log_prob: f64::NEG_INFINITY,
        });
        t.log_prior = 0.5f64.ln();
        t.log_likelihood = f64::NEG_INFINITY;
        t.outputs.insert("n".into(), Value::Int(3));
        t
    }

    #[test]
    fn jsonl_encodes_negative_infinity_as_string() {
        let line = sample_trace().to_json_line();
        assert!(line.starts_with(r#"{"seed":42,"entries":[{"kind":"sample","label":"coin","instance":0,"#));
        assert!(line.contains(r#""log_likelihood":"-inf""#));
        let back = Trace::from_json_line(&line).unwrap();
        assert!(back.bit_eq(&sample_trace()));
        assert_eq!(back.log_joint(), f64::NEG_INFINITY);
    }

    #[test]
    fn duplicate_addresses_rejected() {
        let mut t = sample_trace();
        let mut dup = t.entries[0].clone();
        dup.kind = EntryKind::Observe;
        dup.log_prob = 0.0;
        t.entries.push(dup);
        assert!(matches!(t.validate(), Err(TraceFormatError::DuplicateAddress(_))));
    }

    #[test]
    fn inconsistent_prior_rejected() {
        let mut t = sample_trace();
        t.log_prior = -1.0;
        let line = t.to_json_line();
        assert!(matches!(
            Trace::from_json_line(&line),
            Err(TraceFormatError::Inconsistent(_))
        ));
    }

    #[test]
    fn garbage_is_a_typed_error() {
        assert!(Trace::from_json_line("{").is_err());
        assert!(Trace::from_json_line(r#"{"seed":-1}"#).is_err());
        assert!(read_jsonl("\n\nnot json\n").is_err());
    }
}

//! Execution context through which models draw and observe values, and the
//! driver that turns one model execution into a [`Trace`].

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bridge::BridgeError;
use crate::dist::{DistError, Distribution};
use crate::trace::{Address, EntryKind, Trace, TraceEntry};
use crate::value::Value;

/// What happens when a bound value cannot be scored under the distribution
/// found at its address during a redirected run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IncompatibleBinding {
    /// Fail the run with [`ExecError::RedirectIncompatible`].
    #[default]
    Fail,
    /// Ignore the binding and draw fresh, as for an unbound address.
    Resample,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ExecutionMode {
    /// Every sample site draws fresh.
    #[default]
    Record,
    /// Bound addresses take their bound value; unbound ones draw fresh.
    Redirect {
        bindings: HashMap<Address, Value>,
        on_incompatible: IncompatibleBinding,
    },
}

impl ExecutionMode {
    pub fn redirect(bindings: HashMap<Address, Value>) -> Self {
        ExecutionMode::Redirect {
            bindings,
            on_incompatible: IncompatibleBinding::Fail,
        }
    }

    /// Binds every sample site of `trace` to its recorded value.
    pub fn replay(trace: &Trace) -> Self {
        Self::redirect(
            trace
                .samples()
                .map(|e| (e.address.clone(), e.value.clone()))
                .collect(),
        )
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Distribution(#[from] DistError),
    #[error("non-finite value at {address}")]
    NonFiniteValue { address: Address },
    #[error("bound value {value} at {address} is outside the support of {family}")]
    RedirectIncompatible {
        address: Address,
        value: Value,
        family: &'static str,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model error: {0}")]
    Domain(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

/// A failed run. The trace is discarded; the addresses visited before the
/// failure are kept for diagnostics.
#[derive(Debug, Error)]
#[error("{error} (after {} addressed statements)", partial_addresses.len())]
pub struct RunError {
    #[source]
    pub error: ExecError,
    pub partial_addresses: Vec<Address>,
}

/// The live state of one model execution.
pub struct Context {
    rng: ChaCha8Rng,
    mode: ExecutionMode,
    trace: Trace,
    counters: HashMap<String, u32>,
    fresh: Vec<Address>,
}

impl Context {
    pub fn new(mode: ExecutionMode, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            mode,
            trace: Trace::empty(seed),
            counters: HashMap::new(),
            fresh: Vec::new(),
        }
    }

    fn next_address(&mut self, label: &str) -> Address {
        let instance = match self.counters.get_mut(label) {
            Some(c) => {
                *c += 1;
                *c - 1
            }
            None => {
                self.counters.insert(label.to_owned(), 1);
                0
            }
        };
        Address::new(label, instance)
    }

    /// Draws (or, when redirected, looks up) the value at the next address
    /// for `label`.
    pub fn sample(&mut self, label: &str, dist: &Distribution) -> Result<Value, ExecError> {
        let address = self.next_address(label);
        let bound = match &self.mode {
            ExecutionMode::Record => None,
            ExecutionMode::Redirect {
                bindings,
                on_incompatible,
            } => bindings.get(&address).map(|v| (v.clone(), *on_incompatible)),
        };

        let mut chosen = None;
        if let Some((value, policy)) = bound {
            if !value.is_finite() {
                return Err(ExecError::NonFiniteValue { address });
            }
            let lp = dist.log_prob(&value).unwrap_or(f64::NEG_INFINITY);
            if lp.is_finite() {
                chosen = Some((value, lp));
            } else if policy == IncompatibleBinding::Fail {
                return Err(ExecError::RedirectIncompatible {
                    address,
                    value,
                    family: dist.family_name(),
                });
            }
        }

        let (value, log_prob) = match chosen {
            Some(c) => c,
            None => {
                let value = dist.sample(&mut self.rng);
                let lp = dist.log_prob(&value)?;
                if let ExecutionMode::Redirect { .. } = self.mode {
                    self.fresh.push(address.clone());
                }
                (value, lp)
            }
        };
        self.trace.log_prior += log_prob;
        self.trace.entries.push(TraceEntry {
            kind: EntryKind::Sample,
            address,
            dist: dist.clone(),
            value: value.clone(),
            log_prob,
        });
        Ok(value)
    }

    pub fn sample_real(&mut self, label: &str, dist: &Distribution) -> Result<f64, ExecError> {
        let v = self.sample(label, dist)?;
        v.as_f64()
            .ok_or_else(|| ExecError::Domain(format!("{label}: expected a real, got {}", v.kind())))
    }

    pub fn sample_int(&mut self, label: &str, dist: &Distribution) -> Result<i64, ExecError> {
        let v = self.sample(label, dist)?;
        v.as_int()
            .ok_or_else(|| ExecError::Domain(format!("{label}: expected an integer, got {}", v.kind())))
    }

    pub fn sample_bool(&mut self, label: &str, dist: &Distribution) -> Result<bool, ExecError> {
        let v = self.sample(label, dist)?;
        v.as_bool()
            .ok_or_else(|| ExecError::Domain(format!("{label}: expected a boolean, got {}", v.kind())))
    }

    /// Scores `value` under `dist` and adds it to the log-likelihood.
    pub fn observe(
        &mut self,
        label: &str,
        dist: &Distribution,
        value: impl Into<Value>,
    ) -> Result<(), ExecError> {
        let value = value.into();
        let address = self.next_address(label);
        if !value.is_finite() {
            return Err(ExecError::NonFiniteValue { address });
        }
        let log_prob = dist.log_prob(&value)?;
        self.trace.log_likelihood += log_prob;
        self.trace.entries.push(TraceEntry {
            kind: EntryKind::Observe,
            address,
            dist: dist.clone(),
            value,
            log_prob,
        });
        Ok(())
    }

    pub fn set_output(&mut self, name: &str, value: impl Into<Value>) -> Result<(), ExecError> {
        let value = value.into();
        if !value.is_finite() {
            return Err(ExecError::NonFiniteValue {
                address: Address::new(name, 0),
            });
        }
        self.trace.outputs.insert(name.to_owned(), value);
        Ok(())
    }

    pub fn mode(&self) -> &ExecutionMode {
        &self.mode
    }

    pub fn seed(&self) -> u64 {
        self.trace.seed
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.trace.entries
    }

    fn addresses(&self) -> Vec<Address> {
        self.trace.addresses()
    }
}

/// A program whose random choices and conditioning points all go through a
/// [`Context`].
pub trait Model: Sync {
    fn execute(&self, ctx: &mut Context) -> Result<(), ExecError>;

    /// Labels whose instance-0 value is reported as a posterior latent.
    /// `None` selects every label sampled exactly once in a trace.
    fn latent_labels(&self) -> Option<Vec<String>> {
        None
    }
}

impl<F> Model for F
where
    F: Fn(&mut Context) -> Result<(), ExecError> + Sync,
{
    fn execute(&self, ctx: &mut Context) -> Result<(), ExecError> {
        self(ctx)
    }
}

/// A finished execution together with the addresses that were drawn fresh
/// during a redirected run.
#[derive(Debug, Clone)]
pub struct Execution<T> {
    pub trace: Trace,
    pub fresh: Vec<Address>,
    pub result: T,
}

/// Runs an arbitrary closure as a model and keeps its return value.
pub fn execute_with<T>(
    mode: ExecutionMode,
    seed: u64,
    body: impl FnOnce(&mut Context) -> Result<T, ExecError>,
) -> Result<Execution<T>, RunError> {
    let mut ctx = Context::new(mode, seed);
    match body(&mut ctx) {
        Ok(result) => Ok(Execution {
            trace: ctx.trace,
            fresh: ctx.fresh,
            result,
        }),
        Err(error) => Err(RunError {
            partial_addresses: ctx.addresses(),
            error,
        }),
    }
}

pub fn run_model_detailed<M: Model + ?Sized>(
    model: &M,
    mode: ExecutionMode,
    seed: u64,
) -> Result<Execution<()>, RunError> {
    execute_with(mode, seed, |ctx| model.execute(ctx))
}

/// Executes `model` once and returns its trace.
pub fn run_model<M: Model + ?Sized>(
    model: &M,
    mode: ExecutionMode,
    seed: u64,
) -> Result<Trace, RunError> {
    run_model_detailed(model, mode, seed).map(|e| e.trace)
}

/// Derives an independent 64-bit seed for sub-stream `stream` of `base`
/// (SplitMix64 finaliser).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Labels sampled exactly once in `trace`, in order of appearance.
pub fn singleton_labels(trace: &Trace) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for e in trace.samples() {
        *counts.entry(e.address.label.as_str()).or_default() += 1;
    }
    let mut seen = HashSet::new();
    trace
        .samples()
        .filter(|e| counts[e.address.label.as_str()] == 1)
        .filter(|e| seen.insert(e.address.label.clone()))
        .map(|e| e.address.label.clone())
        .collect()
}

//! Traced probabilistic execution of epidemic simulators, with inference
//! engines for calibration, outcome conditioning and policy scanning.

// Negated comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod context;
pub mod dist;
pub mod graph;
pub mod inference;
pub mod models;
pub mod trace;
pub mod value;

pub use context::{run_model, Context, ExecError, ExecutionMode, Model, RunError};
pub use dist::Distribution;
pub use trace::{Address, Trace};
pub use value::Value;

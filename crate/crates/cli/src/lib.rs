//! Command-line front end: simulations, inference jobs, policy scans and
//! trace-graph export driven by one JSON config per job.

// Negated comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use epi_infer_core::bridge::BridgeError;
use epi_infer_core::inference::InferenceError;
use epi_infer_core::RunError;
use thiserror::Error;

pub use commands::{cmd_graph, cmd_infer, cmd_scan, cmd_simulate, InferSummary};
pub use config::JobConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{field}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        field: String,
        message: String,
        line: Option<usize>,
    },
    /// Unusable input file other than the config (e.g. an empty trace file).
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("model run failed: {0}")]
    Run(#[from] RunError),
    #[error("bridge: {0}")]
    Bridge(#[from] BridgeError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl ToString, line: Option<usize>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.to_string(),
            line,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 0 success, 1 runtime or inference failure, 2 configuration or input error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Input(_) => 2,
            _ => 1,
        }
    }
}

//! Length-prefixed JSON protocol that lets an out-of-process simulator have
//! its random choices drawn, and its observations scored, by this process.

mod client;
mod controller;
mod transport;
pub mod wire;

use std::time::Duration;

use thiserror::Error;

pub use client::{serve_reference_sir, ClientError, ClientSession, RunRequest};
pub use controller::{accept_one, controller_execute, BridgeSession, BridgedModel, ControllerSettings, SessionState};
pub use transport::{memory_pipe, Duplex, MemoryPipe};
pub use wire::{WireError, WireMessage, MAX_FRAME_BYTES, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("transport: {0}")]
    Transport(String),
    #[error("simulator disconnected")]
    Disconnected,
    #[error("simulator did not respond within {0:?}")]
    Timeout(Duration),
    #[error("protocol version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("simulator reported {code}: {message}")]
    Client { code: String, message: String },
    #[error("unexpected {got:?} message in state {state:?}")]
    ProtocolState { state: SessionState, got: &'static str },
}

impl BridgeError {
    /// Stable identifier, shared with the wire `error` codes where one exists.
    pub fn code(&self) -> &str {
        match self {
            BridgeError::Wire(w) => w.code(),
            BridgeError::Transport(_) => "transport",
            BridgeError::Disconnected => "disconnected",
            BridgeError::Timeout(_) => "timeout",
            BridgeError::VersionMismatch { .. } => "version_mismatch",
            BridgeError::Client { code, .. } => code,
            BridgeError::ProtocolState { .. } => "protocol_state",
        }
    }
}

//! Controller side of the protocol: serves an external simulator's random
//! draws through an execution context and records its observations.

use std::net::{TcpListener, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::context::{run_model, Context, ExecError, ExecutionMode, Model, RunError};
use crate::inference::PolicyModel;
use crate::models::InterventionPolicy;
use crate::trace::Trace;

use super::transport::Duplex;
use super::wire::{read_message, write_message, FrameReadError, WireMessage, MAX_FRAME_BYTES, PROTOCOL_VERSION};
use super::BridgeError;

#[derive(Debug, Clone, Copy)]
pub struct ControllerSettings {
    /// Wall-clock budget for one run (and for the handshake).
    pub timeout: Duration,
    pub max_frame_bytes: usize,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(300),
            max_frame_bytes: MAX_FRAME_BYTES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    AwaitingHandshake,
    Ready,
    Running,
    /// A transport, framing or protocol failure left the stream unusable.
    Failed,
}

/// One connection to an external simulator.
pub struct BridgeSession<S: Duplex> {
    stream: S,
    settings: ControllerSettings,
    state: SessionState,
    client_name: Option<String>,
}

impl<S: Duplex> BridgeSession<S> {
    pub fn new(stream: S, settings: ControllerSettings) -> Self {
        Self {
            stream,
            settings,
            state: SessionState::AwaitingHandshake,
            client_name: None,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn client_name(&self) -> Option<&str> {
        self.client_name.as_deref()
    }

    fn send(&mut self, msg: &WireMessage) -> Result<(), BridgeError> {
        write_message(&mut self.stream, msg).map_err(|e| {
            self.state = SessionState::Failed;
            BridgeError::Transport(e.to_string())
        })
    }

    fn recv(&mut self, deadline: Instant) -> Result<WireMessage, BridgeError> {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            self.state = SessionState::Failed;
            return Err(BridgeError::Timeout(self.settings.timeout));
        }
        self.stream
            .set_read_timeout(Some(remaining))
            .map_err(|e| BridgeError::Transport(e.to_string()))?;
        read_message(&mut self.stream, self.settings.max_frame_bytes).map_err(|e| {
            self.state = SessionState::Failed;
            match e {
                FrameReadError::Wire(w) => {
                    let _ = write_message(&mut self.stream, &WireMessage::error(w.code(), w.to_string()));
                    BridgeError::Wire(w)
                }
                FrameReadError::Closed => BridgeError::Disconnected,
                FrameReadError::TimedOut => BridgeError::Timeout(self.settings.timeout),
                FrameReadError::Io(e) => BridgeError::Transport(e.to_string()),
            }
        })
    }

    /// Rejects `msg` as out of order, telling the client why.
    fn violation(&mut self, msg: &WireMessage) -> BridgeError {
        let err = BridgeError::ProtocolState {
            state: self.state,
            got: msg.type_name(),
        };
        let _ = self.send(&WireMessage::error("protocol_state", err.to_string()));
        self.state = SessionState::Failed;
        err
    }

    /// Waits for the client's `handshake` and acknowledges it.
    pub fn handshake(&mut self) -> Result<(), BridgeError> {
        if self.state != SessionState::AwaitingHandshake {
            return Err(BridgeError::ProtocolState {
                state: self.state,
                got: "handshake",
            });
        }
        let deadline = Instant::now() + self.settings.timeout;
        match self.recv(deadline)? {
            WireMessage::Handshake {
                protocol_version,
                client_name,
            } => {
                if protocol_version != PROTOCOL_VERSION {
                    let err = BridgeError::VersionMismatch {
                        expected: PROTOCOL_VERSION,
                        got: protocol_version,
                    };
                    let _ = self.send(&WireMessage::error("version_mismatch", err.to_string()));
                    self.state = SessionState::Failed;
                    return Err(err);
                }
                self.send(&WireMessage::HandshakeAck {
                    protocol_version: PROTOCOL_VERSION,
                })?;
                self.client_name = Some(client_name);
                self.state = SessionState::Ready;
                Ok(())
            }
            other => Err(self.violation(&other)),
        }
    }

    /// Sends `run` and serves the client's requests until it reports its
    /// result. Sample requests go through `ctx.sample`, observations through
    /// `ctx.observe`, and the reported outputs become trace outputs.
    pub fn serve_run(
        &mut self,
        ctx: &mut Context,
        run_id: &str,
        config: &serde_json::Map<String, serde_json::Value>,
    ) -> Result<(), ExecError> {
        if self.state == SessionState::AwaitingHandshake {
            self.handshake()?;
        }
        if self.state != SessionState::Ready {
            return Err(BridgeError::ProtocolState {
                state: self.state,
                got: "run",
            }
            .into());
        }
        let deadline = Instant::now() + self.settings.timeout;
        self.send(&WireMessage::Run {
            run_id: run_id.to_owned(),
            config: config.clone(),
        })?;
        self.state = SessionState::Running;
        loop {
            match self.recv(deadline)? {
                WireMessage::SampleRequest { label, dist } => match ctx.sample(&label, &dist) {
                    Ok(value) => self.send(&WireMessage::SampleResponse { value })?,
                    Err(e) => {
                        let _ = self.send(&WireMessage::error("sample_failed", e.to_string()));
                        self.state = SessionState::Failed;
                        return Err(e);
                    }
                },
                WireMessage::Observe { label, dist, value } => {
                    if let Err(e) = ctx.observe(&label, &dist, value) {
                        let _ = self.send(&WireMessage::error("observe_failed", e.to_string()));
                        self.state = SessionState::Failed;
                        return Err(e);
                    }
                }
                WireMessage::RunResult { outputs } => {
                    for (name, value) in outputs {
                        ctx.set_output(&name, value)?;
                    }
                    self.state = SessionState::Ready;
                    return Ok(());
                }
                WireMessage::Error { code, message } => {
                    // The client abandoned the run; the connection stays usable.
                    self.state = SessionState::Ready;
                    return Err(BridgeError::Client { code, message }.into());
                }
                other => return Err(self.violation(&other).into()),
            }
        }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

/// An external simulator viewed as a [`Model`]. Runs are serialised over the
/// shared session; each run's identifier is derived from its seed.
pub struct BridgedModel<S: Duplex> {
    session: Arc<Mutex<BridgeSession<S>>>,
    config: serde_json::Map<String, serde_json::Value>,
    latent_labels: Option<Vec<String>>,
}

impl<S: Duplex> Clone for BridgedModel<S> {
    fn clone(&self) -> Self {
        Self {
            session: Arc::clone(&self.session),
            config: self.config.clone(),
            latent_labels: self.latent_labels.clone(),
        }
    }
}

impl<S: Duplex> BridgedModel<S> {
    /// Latent labels default to the keys of the config's `priors` object,
    /// when present.
    pub fn new(session: BridgeSession<S>, config: serde_json::Map<String, serde_json::Value>) -> Self {
        Self::shared(Arc::new(Mutex::new(session)), config)
    }

    pub fn shared(
        session: Arc<Mutex<BridgeSession<S>>>,
        config: serde_json::Map<String, serde_json::Value>,
    ) -> Self {
        let latent_labels = config
            .get("priors")
            .and_then(|p| p.as_object())
            .map(|p| p.keys().cloned().collect());
        Self {
            session,
            config,
            latent_labels,
        }
    }

    pub fn with_latent_labels(mut self, labels: Option<Vec<String>>) -> Self {
        self.latent_labels = labels;
        self
    }

    pub fn config(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.config
    }

    pub fn session(&self) -> &Arc<Mutex<BridgeSession<S>>> {
        &self.session
    }
}

impl<S: Duplex> Model for BridgedModel<S> {
    fn execute(&self, ctx: &mut Context) -> Result<(), ExecError> {
        let mut session = self
            .session
            .lock()
            .map_err(|_| BridgeError::Transport("session lock poisoned".into()))?;
        let run_id = format!("seed-{}", ctx.seed());
        session.serve_run(ctx, &run_id, &self.config)
    }

    fn latent_labels(&self) -> Option<Vec<String>> {
        self.latent_labels.clone()
    }
}

impl<S: Duplex> PolicyModel for BridgedModel<S> {
    fn with_policy(&self, policy: &InterventionPolicy) -> Self {
        let mut next = self.clone();
        next.config.insert(
            "policy".into(),
            serde_json::to_value(policy).expect("policy serialises"),
        );
        next
    }
}

/// Performs the handshake on a fresh connection, then executes one run.
pub fn controller_execute<S: Duplex>(
    stream: S,
    settings: ControllerSettings,
    mode: ExecutionMode,
    config: serde_json::Map<String, serde_json::Value>,
    seed: u64,
) -> Result<Trace, RunError> {
    let mut session = BridgeSession::new(stream, settings);
    session.handshake().map_err(|e| RunError {
        error: e.into(),
        partial_addresses: Vec::new(),
    })?;
    let model = BridgedModel::new(session, config);
    run_model(&model, mode, seed)
}

/// Binds `addr` and accepts a single simulator connection.
pub fn accept_one<A: ToSocketAddrs>(
    addr: A,
    settings: ControllerSettings,
) -> std::io::Result<BridgeSession<std::net::TcpStream>> {
    let listener = TcpListener::bind(addr)?;
    let (stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    Ok(BridgeSession::new(stream, settings))
}

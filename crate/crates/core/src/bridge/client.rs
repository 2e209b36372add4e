//! Simulator side of the protocol, plus a reference chain-binomial SIR
//! simulator that speaks it. The reference simulator is what the loopback
//! tests and the protocol examples run against.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::dist::Distribution;
use crate::models::EpiSettings;
use crate::value::Value;

use super::wire::{read_message, write_message, FrameReadError, WireError, WireMessage, MAX_FRAME_BYTES, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("controller closed the connection")]
    Closed,
    #[error("controller reported {code}: {message}")]
    Controller { code: String, message: String },
    #[error("unexpected {0:?} message")]
    Unexpected(&'static str),
}

impl From<FrameReadError> for ClientError {
    fn from(e: FrameReadError) -> Self {
        match e {
            FrameReadError::Wire(w) => ClientError::Wire(w),
            FrameReadError::Closed => ClientError::Closed,
            FrameReadError::TimedOut => ClientError::Io(std::io::ErrorKind::TimedOut.into()),
            FrameReadError::Io(e) => ClientError::Io(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub run_id: String,
    pub config: serde_json::Map<String, serde_json::Value>,
}

pub struct ClientSession<S: Read + Write> {
    stream: S,
}

impl<S: Read + Write> ClientSession<S> {
    /// Sends `handshake` and waits for the acknowledgement.
    pub fn connect(mut stream: S, client_name: &str) -> Result<Self, ClientError> {
        write_message(
            &mut stream,
            &WireMessage::Handshake {
                protocol_version: PROTOCOL_VERSION,
                client_name: client_name.to_owned(),
            },
        )?;
        let mut session = Self { stream };
        match session.recv()? {
            WireMessage::HandshakeAck { .. } => Ok(session),
            other => Err(ClientError::Unexpected(other.type_name())),
        }
    }

    fn recv(&mut self) -> Result<WireMessage, ClientError> {
        match read_message(&mut self.stream, MAX_FRAME_BYTES)? {
            WireMessage::Error { code, message } => Err(ClientError::Controller { code, message }),
            msg => Ok(msg),
        }
    }

    /// Waits for the next `run`; `None` once the controller hangs up.
    pub fn next_run(&mut self) -> Result<Option<RunRequest>, ClientError> {
        match self.recv() {
            Ok(WireMessage::Run { run_id, config }) => Ok(Some(RunRequest { run_id, config })),
            Ok(other) => Err(ClientError::Unexpected(other.type_name())),
            Err(ClientError::Closed) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn sample(&mut self, label: &str, dist: &Distribution) -> Result<Value, ClientError> {
        write_message(
            &mut self.stream,
            &WireMessage::SampleRequest {
                label: label.to_owned(),
                dist: dist.clone(),
            },
        )?;
        match self.recv()? {
            WireMessage::SampleResponse { value } => Ok(value),
            other => Err(ClientError::Unexpected(other.type_name())),
        }
    }

    pub fn observe(&mut self, label: &str, dist: &Distribution, value: Value) -> Result<(), ClientError> {
        write_message(
            &mut self.stream,
            &WireMessage::Observe {
                label: label.to_owned(),
                dist: dist.clone(),
                value,
            },
        )?;
        Ok(())
    }

    pub fn finish(&mut self, outputs: BTreeMap<String, Value>) -> Result<(), ClientError> {
        write_message(&mut self.stream, &WireMessage::RunResult { outputs })?;
        Ok(())
    }

    /// Abandons the current run.
    pub fn fail(&mut self, code: &str, message: &str) -> Result<(), ClientError> {
        write_message(&mut self.stream, &WireMessage::error(code, message))?;
        Ok(())
    }

    pub fn get_mut(&mut self) -> &mut S {
        &mut self.stream
    }
}

fn as_count(v: Value) -> Result<u64, ClientError> {
    match v {
        Value::Int(i) if i >= 0 => Ok(i as u64),
        _ => Err(ClientError::Unexpected("sample_response")),
    }
}

fn as_real(v: Value) -> Result<f64, ClientError> {
    v.as_f64().ok_or(ClientError::Unexpected("sample_response"))
}

fn reference_run<S: Read + Write>(session: &mut ClientSession<S>, s: &EpiSettings) -> Result<(), ClientError> {
    let n = s.population;
    let beta = as_real(session.sample("beta", &s.priors.beta)?)?;
    let gamma = as_real(session.sample("gamma", &s.priors.gamma)?)?;
    let eligible = n - s.initial_infected;
    let vaccinated = ((s.policy.vaccination_coverage * eligible as f64).round() as u64).min(eligible);
    let (mut sus, mut inf, mut rec) = (eligible - vaccinated, s.initial_infected, vaccinated);
    let steps = (1.0 / s.dt).round() as u32;
    let mut infectious = vec![inf];
    let mut new_series = vec![0u64];
    for day in 0..s.horizon_days {
        let b = if day >= s.policy.start_day {
            beta * (1.0 - s.policy.contact_reduction)
        } else {
            beta
        };
        let mut today = 0;
        for _ in 0..steps {
            let p_inf = if inf == 0 || b == 0.0 {
                0.0
            } else {
                (-(-(b * inf as f64 * s.dt / n as f64)).exp_m1()).clamp(0.0, 1.0)
            };
            let d_inf = Distribution::binomial(sus, p_inf).map_err(|_| ClientError::Unexpected("run"))?;
            let x = as_count(session.sample("step_inf", &d_inf)?)?;
            let p_rec = (-(-gamma * s.dt).exp_m1()).clamp(0.0, 1.0);
            let d_rec = Distribution::binomial(inf, p_rec).map_err(|_| ClientError::Unexpected("run"))?;
            let y = as_count(session.sample("step_rec", &d_rec)?)?;
            sus -= x;
            inf = inf + x - y;
            rec += y;
            today += x;
        }
        infectious.push(inf);
        new_series.push(today);
        if let Some(count) = s.data.get(day + 1) {
            let noise = Distribution::poisson(today as f64 + 0.1).map_err(|_| ClientError::Unexpected("run"))?;
            session.observe("obs", &noise, Value::Int(count as i64))?;
        }
    }
    debug_assert_eq!(sus + inf + rec, n);
    let mut peak_day = 0;
    for (d, &x) in new_series.iter().enumerate() {
        if x > new_series[peak_day] {
            peak_day = d;
        }
    }
    let mut outputs = BTreeMap::new();
    outputs.insert("total_cases".into(), Value::Int(new_series.iter().sum::<u64>() as i64));
    outputs.insert("peak_day".into(), Value::Int(peak_day as i64));
    outputs.insert("peak_height".into(), Value::Int(new_series[peak_day] as i64));
    outputs.insert(
        "icu".into(),
        Value::Vector(infectious.iter().map(|&i| (s.icu.rho * i as f64).round()).collect()),
    );
    session.finish(outputs)
}

/// Connects as a simulator and serves chain-binomial SIR runs until the
/// controller hangs up. Each `run` config is read as the settings of a
/// `sir` model; a config that does not parse is answered with an `error`.
pub fn serve_reference_sir<S: Read + Write>(stream: S) -> Result<u64, ClientError> {
    let mut session = ClientSession::connect(stream, "reference-sir")?;
    let mut served = 0;
    while let Some(run) = session.next_run()? {
        let settings: EpiSettings = match serde_json::from_value(serde_json::Value::Object(run.config)) {
            Ok(s) => s,
            Err(e) => {
                session.fail("invalid_config", &e.to_string())?;
                continue;
            }
        };
        match reference_run(&mut session, &settings) {
            Ok(()) => served += 1,
            // The controller aborted this run but may send another.
            Err(ClientError::Controller { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(served)
}

//! Length-prefixed JSON frames and the messages they carry.
//!
//! A frame is a 4-byte little-endian payload length followed by exactly that
//! many bytes of UTF-8 JSON. The payload is one object whose `type` field
//! names the message variant.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::Distribution;
use crate::value::Value;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;

const MESSAGE_TYPES: [&str; 8] = [
    "handshake",
    "handshake_ack",
    "run",
    "sample_request",
    "sample_response",
    "observe",
    "run_result",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Handshake {
        protocol_version: u32,
        client_name: String,
    },
    HandshakeAck {
        protocol_version: u32,
    },
    Run {
        run_id: String,
        config: serde_json::Map<String, serde_json::Value>,
    },
    SampleRequest {
        label: String,
        dist: Distribution,
    },
    SampleResponse {
        value: Value,
    },
    Observe {
        label: String,
        dist: Distribution,
        value: Value,
    },
    RunResult {
        outputs: BTreeMap<String, Value>,
    },
    Error {
        code: String,
        message: String,
    },
}

impl WireMessage {
    pub fn type_name(&self) -> &'static str {
        match self {
            WireMessage::Handshake { .. } => "handshake",
            WireMessage::HandshakeAck { .. } => "handshake_ack",
            WireMessage::Run { .. } => "run",
            WireMessage::SampleRequest { .. } => "sample_request",
            WireMessage::SampleResponse { .. } => "sample_response",
            WireMessage::Observe { .. } => "observe",
            WireMessage::RunResult { .. } => "run_result",
            WireMessage::Error { .. } => "error",
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        WireMessage::Error {
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

/// Decoding failures. Each has a stable code usable in `Error` messages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("frame of {len} bytes exceeds the {max} byte limit")]
    FrameTooLarge { len: usize, max: usize },
    #[error("truncated frame: expected {expected} bytes, {available} available")]
    Truncated { expected: usize, available: usize },
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("payload is not valid UTF-8")]
    InvalidUtf8,
    #[error("malformed JSON payload: {0}")]
    MalformedJson(String),
    #[error("payload has no string `type` field")]
    MissingType,
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
}

impl WireError {
    pub fn code(&self) -> &'static str {
        match self {
            WireError::FrameTooLarge { .. } => "frame_too_large",
            WireError::Truncated { .. } => "truncated_frame",
            WireError::TrailingBytes(_) => "trailing_bytes",
            WireError::InvalidUtf8 => "invalid_utf8",
            WireError::MalformedJson(_) => "malformed_json",
            WireError::MissingType => "missing_type",
            WireError::UnknownType(_) => "unknown_type",
            WireError::MissingField(_) => "missing_field",
            WireError::InvalidField(_) => "invalid_field",
        }
    }
}

/// The canonical JSON payload: `type` first, then fields in declaration order.
pub fn encode_payload(msg: &WireMessage) -> Vec<u8> {
    serde_json::to_vec(msg).expect("wire messages always serialise")
}

pub fn encode_message(msg: &WireMessage) -> Vec<u8> {
    let payload = encode_payload(msg);
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Parses a frame payload (without the length prefix).
pub fn decode_payload(payload: &[u8]) -> Result<WireMessage, WireError> {
    let text = std::str::from_utf8(payload).map_err(|_| WireError::InvalidUtf8)?;
    let json: serde_json::Value =
        serde_json::from_str(text).map_err(|e| WireError::MalformedJson(e.to_string()))?;
    let ty = json
        .as_object()
        .and_then(|o| o.get("type"))
        .and_then(|t| t.as_str())
        .ok_or(WireError::MissingType)?;
    if !MESSAGE_TYPES.contains(&ty) {
        return Err(WireError::UnknownType(ty.to_owned()));
    }
    serde_json::from_value(json).map_err(|e| {
        let msg = e.to_string();
        if msg.starts_with("missing field") {
            WireError::MissingField(msg)
        } else {
            WireError::InvalidField(msg)
        }
    })
}

/// Splits one frame off the front of `bytes`, returning the payload and the
/// number of bytes consumed.
pub fn split_frame(bytes: &[u8], max_frame: usize) -> Result<(&[u8], usize), WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated {
            expected: 4,
            available: bytes.len(),
        });
    }
    let len = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if len > max_frame {
        return Err(WireError::FrameTooLarge { len, max: max_frame });
    }
    let available = bytes.len() - 4;
    if available < len {
        return Err(WireError::Truncated {
            expected: len,
            available,
        });
    }
    Ok((&bytes[4..4 + len], 4 + len))
}

/// Decodes exactly one complete frame.
pub fn decode_message(bytes: &[u8]) -> Result<WireMessage, WireError> {
    let (payload, used) = split_frame(bytes, MAX_FRAME_BYTES)?;
    if used != bytes.len() {
        return Err(WireError::TrailingBytes(bytes.len() - used));
    }
    decode_payload(payload)
}

/// Errors reading a frame from a byte stream.
#[derive(Debug, Error)]
pub enum FrameReadError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("peer closed the connection")]
    Closed,
    #[error("read timed out")]
    TimedOut,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

fn classify(e: io::Error) -> FrameReadError {
    match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameReadError::Closed,
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => FrameReadError::TimedOut,
        _ => FrameReadError::Io(e),
    }
}

/// Reads one frame. The payload is only read once its declared length has
/// been checked against `max_frame`.
pub fn read_message<R: Read + ?Sized>(reader: &mut R, max_frame: usize) -> Result<WireMessage, FrameReadError> {
    let mut header = [0u8; 4];
    reader.read_exact(&mut header).map_err(classify)?;
    let len = u32::from_le_bytes(header) as usize;
    if len > max_frame {
        return Err(WireError::FrameTooLarge { len, max: max_frame }.into());
    }
    let mut payload = vec![0u8; len];
    let mut filled = 0;
    while filled < len {
        match reader.read(&mut payload[filled..]) {
            Ok(0) => {
                return Err(WireError::Truncated {
                    expected: len,
                    available: filled,
                }
                .into())
            }
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(classify(e)),
        }
    }
    Ok(decode_payload(&payload)?)
}

pub fn write_message<W: Write + ?Sized>(writer: &mut W, msg: &WireMessage) -> io::Result<()> {
    writer.write_all(&encode_message(msg))?;
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn payload_of(msg: &WireMessage) -> String {
        String::from_utf8(encode_payload(msg)).unwrap()
    }

    #[test]
    fn canonical_payloads() {
        let m = WireMessage::SampleResponse { value: Value::Real(0.5) };
        assert_eq!(payload_of(&m), r#"{"type":"sample_response","value":0.5}"#);
        let bytes = encode_message(&m);
        assert_eq!(u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize, bytes.len() - 4);
        assert_eq!(
            payload_of(&WireMessage::HandshakeAck { protocol_version: 1 }),
            r#"{"type":"handshake_ack","protocol_version":1}"#
        );
        let obs = WireMessage::Observe {
            label: "obs".into(),
            dist: Distribution::poisson(2.0).unwrap(),
            value: Value::Int(2),
        };
        assert_eq!(
            payload_of(&obs),
            r#"{"type":"observe","label":"obs","dist":{"family":"poisson","params":{"rate":2.0}},"value":2}"#
        );
    }

    fn frame(payload: &[u8]) -> Vec<u8> {
        let mut v = (payload.len() as u32).to_le_bytes().to_vec();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn decode_error_codes() {
        let mut truncated = 5u32.to_le_bytes().to_vec();
        truncated.extend_from_slice(b"{}");
        assert_eq!(decode_message(&truncated).unwrap_err().code(), "truncated_frame");
        assert_eq!(
            decode_message(&frame(br#"{"type":"warp_drive"}"#)).unwrap_err(),
            WireError::UnknownType("warp_drive".into())
        );
        assert_eq!(decode_message(&frame(&[0xff, 0xfe])).unwrap_err().code(), "invalid_utf8");
        assert_eq!(decode_message(&frame(b"{not json")).unwrap_err().code(), "malformed_json");
        assert_eq!(decode_message(&frame(b"[1,2]")).unwrap_err().code(), "missing_type");
        assert_eq!(
            decode_message(&frame(br#"{"type":"sample_request","label":"x"}"#)).unwrap_err().code(),
            "missing_field"
        );
        assert_eq!(
            decode_message(&frame(br#"{"type":"handshake_ack","protocol_version":"one"}"#))
                .unwrap_err()
                .code(),
            "invalid_field"
        );
        let oversize = ((MAX_FRAME_BYTES + 1) as u32).to_le_bytes();
        assert_eq!(decode_message(&oversize).unwrap_err().code(), "frame_too_large");
        let mut trailing = frame(br#"{"type":"handshake_ack","protocol_version":1}"#);
        trailing.push(0);
        assert_eq!(decode_message(&trailing).unwrap_err().code(), "trailing_bytes");
    }

    #[test]
    fn decode_schema_instance_and_extra_fields() {
        let bytes = frame(
            br#"{"type":"observe","label":"obs","dist":{"family":"poisson","params":{"rate":2.0}},"value":2}"#,
        );
        assert_eq!(
            decode_message(&bytes).unwrap(),
            WireMessage::Observe {
                label: "obs".into(),
                dist: Distribution::poisson(2.0).unwrap(),
                value: Value::Int(2)
            }
        );
        let extra = frame(br#"{"type":"handshake_ack","protocol_version":1,"colour":"blue"}"#);
        assert_eq!(decode_message(&extra).unwrap(), WireMessage::HandshakeAck { protocol_version: 1 });
    }

    #[test]
    fn invalid_distribution_is_invalid_field() {
        let bytes = frame(br#"{"type":"sample_request","label":"x","dist":{"family":"normal","params":{"mean":0,"std":-1}}}"#);
        assert_eq!(decode_message(&bytes).unwrap_err().code(), "invalid_field");
    }

    #[test]
    fn stream_reader_respects_limit_before_reading_payload() {
        let mut bytes: &[u8] = &100u32.to_le_bytes();
        match read_message(&mut bytes, 10) {
            Err(FrameReadError::Wire(WireError::FrameTooLarge { len: 100, max: 10 })) => {}
            other => panic!("{other:?}"),
        }
        let mut empty: &[u8] = &[];
        assert!(matches!(read_message(&mut empty, 10), Err(FrameReadError::Closed)));
    }

    proptest! {
        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = decode_message(&bytes);
            let mut r: &[u8] = &bytes;
            let _ = read_message(&mut r, 1024);
        }
    }
}

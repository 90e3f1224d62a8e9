//! Wire format shared with clients.
//!
//! Binary frame messages, all integers big-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 2 | magic `0x55 0x46` ("UF") |
//! | 1 | version = 1 |
//! | 1 | stream id: 0 RGB, 1 US, 2 PRED, 3 COMPOSITE, 4 REF |
//! | 8 | timestamp, microseconds |
//! | 2 | width |
//! | 2 | height |
//! | 1 | pixel format: 0 GRAY8, 1 RGB8 |
//! | 4 | payload length |
//! | n | payload, row-major |
//!
//! Control requests and replies are JSON text messages:
//! `{"id": n, "type": "...", ...}` is answered by `{"re": n, "ok": true|false, ...}`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::frame::{ImageFrame, PixelFormat, StreamId};

pub const MAGIC: [u8; 2] = [0x55, 0x46];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 21;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("message is {0} bytes, shorter than the header")]
    Truncated(usize),
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown stream id {0}")]
    UnknownStream(u8),
    #[error("unknown pixel format {0}")]
    UnknownFormat(u8),
    #[error("payload length field says {declared}, message carries {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("payload does not match {width}x{height} {format:?}")]
    PayloadSize { width: u16, height: u16, format: PixelFormat },
    #[error("frame {0}x{1} exceeds the 16-bit size fields")]
    TooLarge(u32, u32),
}

pub fn encode_frame(frame: &ImageFrame) -> Result<Vec<u8>, ProtocolError> {
    let (w, h) = (frame.width(), frame.height());
    if w > u16::MAX as u32 || h > u16::MAX as u32 {
        return Err(ProtocolError::TooLarge(w, h));
    }
    let payload = frame.payload();
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(frame.stream_id.wire_id());
    out.extend_from_slice(&frame.timestamp_us.to_be_bytes());
    out.extend_from_slice(&(w as u16).to_be_bytes());
    out.extend_from_slice(&(h as u16).to_be_bytes());
    out.push(frame.format().wire_id());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn decode_frame(msg: &[u8]) -> Result<ImageFrame, ProtocolError> {
    if msg.len() < HEADER_LEN {
        return Err(ProtocolError::Truncated(msg.len()));
    }
    let magic = [msg[0], msg[1]];
    if magic != MAGIC {
        return Err(ProtocolError::BadMagic(magic));
    }
    if msg[2] != VERSION {
        return Err(ProtocolError::UnsupportedVersion(msg[2]));
    }
    let stream = StreamId::from_wire_id(msg[3]).ok_or(ProtocolError::UnknownStream(msg[3]))?;
    let ts = u64::from_be_bytes(msg[4..12].try_into().unwrap());
    let w = u16::from_be_bytes([msg[12], msg[13]]);
    let h = u16::from_be_bytes([msg[14], msg[15]]);
    let format = PixelFormat::from_wire_id(msg[16]).ok_or(ProtocolError::UnknownFormat(msg[16]))?;
    let declared = u32::from_be_bytes(msg[17..21].try_into().unwrap()) as usize;
    let payload = &msg[HEADER_LEN..];
    if declared != payload.len() {
        return Err(ProtocolError::LengthMismatch {
            declared,
            actual: payload.len(),
        });
    }
    ImageFrame::new(stream, ts, w as u32, h as u32, format, payload).map_err(|_| ProtocolError::PayloadSize {
        width: w,
        height: h,
        format,
    })
}

/// Control request bodies, tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlRequest {
    SetWeights { w_rgb: f64, w_us: f64, w_pred: f64 },
    StartRecord {
        #[serde(default)]
        dir: Option<PathBuf>,
    },
    StopRecord,
    Freeze,
    Unfreeze,
    /// A session directory, or an id under the configured reference root.
    SelectReference { session: String },
    GetMetrics,
    GetStatus,
}

pub const CONTROL_TYPES: [&str; 8] = [
    "set_weights",
    "start_record",
    "stop_record",
    "freeze",
    "unfreeze",
    "select_reference",
    "get_metrics",
    "get_status",
];

/// Error carried in a negative reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlError {
    pub code: &'static str,
    pub message: String,
}

impl ControlError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// A parsed request with its correlation id.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMessage {
    pub id: Value,
    pub request: ControlRequest,
}

/// Parses a text message. Failures come back as the reply to send, which
/// carries the request id whenever one could be read.
pub fn parse_control(text: &str) -> Result<ControlMessage, String> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return Err(reply_err(&Value::Null, &ControlError::new("malformed", e.to_string()))),
    };
    let Value::Object(mut obj) = value else {
        return Err(reply_err(&Value::Null, &ControlError::new("malformed", "expected a JSON object")));
    };
    let id = obj.remove("id").unwrap_or(Value::Null);
    let ty = obj.get("type").and_then(Value::as_str).map(str::to_string);
    match ty {
        None => Err(reply_err(&id, &ControlError::new("malformed", "missing \"type\""))),
        Some(t) if !CONTROL_TYPES.contains(&t.as_str()) => {
            Err(reply_err(&id, &ControlError::new("unknown_type", format!("unknown message type {t:?}"))))
        }
        Some(_) => match serde_json::from_value::<ControlRequest>(Value::Object(obj.clone())) {
            Ok(request) => {
                // Tagged unit variants accept any extra field, so check by hand.
                let known = serde_json::to_value(&request).expect("request serializes");
                if let Some(extra) = obj.keys().find(|k| known.get(k.as_str()).is_none()) {
                    return Err(reply_err(&id, &ControlError::new("invalid_payload", format!("unknown field {extra:?}"))));
                }
                Ok(ControlMessage { id, request })
            }
            Err(e) => Err(reply_err(&id, &ControlError::new("invalid_payload", e.to_string()))),
        },
    }
}

pub fn reply_ok(id: &Value, body: Map<String, Value>) -> String {
    let mut obj = Map::new();
    obj.insert("re".into(), id.clone());
    obj.insert("ok".into(), Value::Bool(true));
    obj.extend(body);
    Value::Object(obj).to_string()
}

pub fn reply_err(id: &Value, err: &ControlError) -> String {
    json!({"re": id, "ok": false, "error": {"code": err.code, "message": err.message}}).to_string()
}

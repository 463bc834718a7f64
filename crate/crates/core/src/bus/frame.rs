//! Wire framing: a 4-byte big-endian length `N` followed by exactly `N`
//! bytes of UTF-8 JSON encoding one [`Envelope`].

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

/// Largest accepted frame body, 64 MiB.
pub const MAX_FRAME_LEN: usize = 64 * 1024 * 1024;

/// Operation name of error responses; their payload is `{"message": ...}`.
pub const ERROR_OP: &str = "error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub id: u64,
    pub op: String,
    pub payload: Map<String, Json>,
}

impl Envelope {
    pub fn new(id: u64, op: impl Into<String>, payload: Map<String, Json>) -> Self {
        Envelope {
            id,
            op: op.into(),
            payload,
        }
    }

    /// Builds an envelope from a JSON payload, which must be an object.
    pub fn from_json(id: u64, op: impl Into<String>, payload: Json) -> Result<Self, FrameError> {
        match payload {
            Json::Object(m) => Ok(Envelope::new(id, op, m)),
            _ => Err(FrameError::Malformed(
                "payload must be a JSON object".into(),
            )),
        }
    }

    pub fn error(id: u64, message: impl Into<String>) -> Self {
        let mut m = Map::new();
        m.insert("message".into(), Json::String(message.into()));
        Envelope {
            id,
            op: ERROR_OP.into(),
            payload: m,
        }
    }

    pub fn is_error(&self) -> bool {
        self.op == ERROR_OP
    }

    pub fn error_message(&self) -> Option<&str> {
        self.is_error().then(|| {
            self.payload
                .get("message")
                .and_then(Json::as_str)
                .unwrap_or("unspecified error")
        })
    }

    pub fn payload_json(&self) -> Json {
        Json::Object(self.payload.clone())
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_LEN}-byte limit")]
    TooLarge(usize),
    #[error("incomplete frame: have {have} of {need} bytes")]
    Incomplete { have: usize, need: usize },
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub fn encode_frame(envelope: &Envelope) -> Result<Vec<u8>, FrameError> {
    let body = serde_json::to_vec(envelope).map_err(|e| FrameError::Malformed(e.to_string()))?;
    if body.len() > MAX_FRAME_LEN {
        return Err(FrameError::TooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Reads the length prefix; errors if it exceeds the frame limit.
pub fn frame_len(header: [u8; 4]) -> Result<usize, FrameError> {
    let n = u32::from_be_bytes(header) as usize;
    if n > MAX_FRAME_LEN {
        return Err(FrameError::TooLarge(n));
    }
    Ok(n)
}

/// Parses a frame body (without its length prefix).
pub fn decode_body(body: &[u8]) -> Result<Envelope, FrameError> {
    let text = std::str::from_utf8(body)
        .map_err(|e| FrameError::Malformed(format!("invalid UTF-8: {e}")))?;
    serde_json::from_str(text).map_err(|e| FrameError::Malformed(e.to_string()))
}

/// Decodes one frame from the start of `bytes`, returning the envelope and
/// the number of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Envelope, usize), FrameError> {
    if bytes.len() < 4 {
        return Err(FrameError::Incomplete {
            have: bytes.len(),
            need: 4,
        });
    }
    let n = frame_len([bytes[0], bytes[1], bytes[2], bytes[3]])?;
    if bytes.len() < 4 + n {
        return Err(FrameError::Incomplete {
            have: bytes.len(),
            need: 4 + n,
        });
    }
    Ok((decode_body(&bytes[4..4 + n])?, 4 + n))
}

pub fn write_frame(w: &mut impl Write, envelope: &Envelope) -> Result<(), FrameError> {
    w.write_all(&encode_frame(envelope)?)?;
    w.flush()?;
    Ok(())
}

/// Blocking read of one frame. A malformed body is fully consumed first, so
/// the stream stays aligned on the next frame.
pub fn read_frame(r: &mut impl Read) -> Result<Envelope, FrameError> {
    let mut header = [0u8; 4];
    read_exact_or_incomplete(r, &mut header, 4)?;
    let n = frame_len(header)?;
    let mut body = vec![0u8; n];
    read_exact_or_incomplete(r, &mut body, 4 + n)?;
    decode_body(&body)
}

fn read_exact_or_incomplete(
    r: &mut impl Read,
    buf: &mut [u8],
    need: usize,
) -> Result<(), FrameError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(FrameError::Incomplete {
                    have: need - buf.len() + filled,
                    need,
                })
            }
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

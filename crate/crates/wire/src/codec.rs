//! JSON-RPC 2.0 messages and their two framings.
//!
//! Stdio carries one JSON object per line. TCP carries
//! `<decimal byte count>\r\n\r\n<body>` so bodies may contain newlines.

use std::io::{self, BufRead, Write};

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{self, ErrorObject};

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: i64,
    pub method: String,
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    /// `None` only when the request could not be read far enough to find its id.
    pub id: Option<i64>,
    pub outcome: Result<Value, ErrorObject>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request(Request),
    Response(Response),
}

impl Request {
    pub fn new(id: i64, method: impl Into<String>, params: Value) -> Self {
        Self {
            id,
            method: method.into(),
            params,
        }
    }
}

impl Response {
    pub fn ok(id: i64, result: Value) -> Self {
        Self {
            id: Some(id),
            outcome: Ok(result),
        }
    }

    pub fn err(id: Option<i64>, error: ErrorObject) -> Self {
        Self {
            id,
            outcome: Err(error),
        }
    }
}

impl Serialize for Message {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("jsonrpc", "2.0")?;
        match self {
            Message::Request(r) => {
                m.serialize_entry("id", &r.id)?;
                m.serialize_entry("method", &r.method)?;
                m.serialize_entry("params", &r.params)?;
            }
            Message::Response(r) => {
                m.serialize_entry("id", &r.id)?;
                match &r.outcome {
                    Ok(v) => m.serialize_entry("result", v)?,
                    Err(e) => m.serialize_entry("error", e)?,
                }
            }
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    /// Not JSON at all.
    #[error("parse error: {0}")]
    Parse(String),
    /// JSON, but not a JSON-RPC 2.0 message. Carries the id when one was found.
    #[error("invalid message: {message}")]
    Invalid { id: Option<i64>, message: String },
}

impl CodecError {
    /// The error response a server sends back for this failure.
    pub fn to_response(&self) -> Response {
        match self {
            CodecError::Parse(m) => {
                Response::err(None, ErrorObject::new(error::PARSE_ERROR, m.clone()))
            }
            CodecError::Invalid { id, message } => Response::err(
                *id,
                ErrorObject::new(error::INVALID_REQUEST, message.clone()),
            ),
        }
    }
}

pub fn encode(message: &Message) -> Vec<u8> {
    serde_json::to_vec(message).expect("messages always serialize")
}

pub fn decode(bytes: &[u8]) -> Result<Message, CodecError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| CodecError::Parse(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(invalid(None, "message is not an object"));
    };
    let id = match obj.remove("id") {
        Some(Value::Number(n)) => match n.as_i64() {
            Some(i) => Some(i),
            None => return Err(invalid(None, "id must be an integer")),
        },
        Some(Value::Null) | None => None,
        Some(_) => return Err(invalid(None, "id must be an integer")),
    };
    if obj.remove("jsonrpc") != Some(Value::String("2.0".into())) {
        return Err(invalid(id, "jsonrpc must be \"2.0\""));
    }
    if let Some(method) = obj.remove("method") {
        let Value::String(method) = method else {
            return Err(invalid(id, "method must be a string"));
        };
        let id = id.ok_or_else(|| invalid(None, "request has no id"))?;
        let params = obj.remove("params").unwrap_or(Value::Null);
        no_extra(&obj, Some(id))?;
        return Ok(Message::Request(Request { id, method, params }));
    }
    let outcome = match (obj.remove("result"), obj.remove("error")) {
        (Some(v), None) => Ok(v),
        (None, Some(e)) => Err(serde_json::from_value::<ErrorObject>(e)
            .map_err(|e| invalid(id, &format!("bad error object: {e}")))?),
        _ => {
            return Err(invalid(
                id,
                "response needs exactly one of result and error",
            ))
        }
    };
    no_extra(&obj, id)?;
    Ok(Message::Response(Response { id, outcome }))
}

fn invalid(id: Option<i64>, message: &str) -> CodecError {
    CodecError::Invalid {
        id,
        message: message.to_string(),
    }
}

fn no_extra(rest: &Map<String, Value>, id: Option<i64>) -> Result<(), CodecError> {
    match rest.keys().next() {
        Some(k) => Err(invalid(id, &format!("unexpected member {k:?}"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Framing {
    /// One message per line.
    Lines,
    /// `<len>\r\n\r\n<body>`.
    LengthPrefixed,
}

impl Framing {
    pub fn write(self, w: &mut impl Write, body: &[u8]) -> io::Result<()> {
        match self {
            Framing::Lines => {
                w.write_all(body)?;
                w.write_all(b"\n")?;
            }
            Framing::LengthPrefixed => {
                write!(w, "{}\r\n\r\n", body.len())?;
                w.write_all(body)?;
            }
        }
        w.flush()
    }

    /// `Ok(None)` on a clean end of stream.
    pub fn read(self, r: &mut impl BufRead) -> io::Result<Option<Vec<u8>>> {
        match self {
            Framing::Lines => loop {
                let mut line = Vec::new();
                if r.read_until(b'\n', &mut line)? == 0 {
                    return Ok(None);
                }
                while matches!(line.last(), Some(b'\n' | b'\r')) {
                    line.pop();
                }
                if !line.is_empty() {
                    return Ok(Some(line));
                }
            },
            Framing::LengthPrefixed => {
                let mut header = Vec::new();
                if r.read_until(b'\n', &mut header)? == 0 {
                    return Ok(None);
                }
                let text = std::str::from_utf8(&header)
                    .ok()
                    .map(str::trim_end)
                    .ok_or_else(|| bad_frame("header is not text"))?;
                let len: usize = text
                    .parse()
                    .map_err(|_| bad_frame("header is not a byte count"))?;
                let mut blank = [0u8; 2];
                r.read_exact(&mut blank)?;
                if &blank != b"\r\n" {
                    return Err(bad_frame("missing blank line after header"));
                }
                let mut body = vec![0u8; len];
                r.read_exact(&mut body)?;
                Ok(Some(body))
            }
        }
    }
}

fn bad_frame(what: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("bad frame: {what}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn request_round_trip() {
        let m = Message::Request(Request::new(7, "dalia/list_capabilities", json!({})));
        let bytes = encode(&m);
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            r#"{"jsonrpc":"2.0","id":7,"method":"dalia/list_capabilities","params":{}}"#
        );
        assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn error_response_round_trip() {
        let m = Message::Response(Response::err(
            Some(3),
            ErrorObject::new(-32601, "method not found: x"),
        ));
        assert_eq!(decode(&encode(&m)).unwrap(), m);
        let m = Message::Response(Response::err(None, ErrorObject::new(-32700, "bad")));
        assert!(std::str::from_utf8(&encode(&m))
            .unwrap()
            .contains(r#""id":null"#));
        assert_eq!(decode(&encode(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_bad_messages() {
        assert!(matches!(decode(b"{oops"), Err(CodecError::Parse(_))));
        assert!(matches!(
            decode(br#"{"jsonrpc":"1.0","id":1,"method":"m"}"#),
            Err(CodecError::Invalid { id: Some(1), .. })
        ));
        assert!(matches!(
            decode(br#"{"jsonrpc":"2.0","id":1,"result":1,"error":{"code":1,"message":"m"}}"#),
            Err(CodecError::Invalid { .. })
        ));
        assert!(matches!(
            decode(br#"{"jsonrpc":"2.0","method":"m"}"#),
            Err(CodecError::Invalid { id: None, .. })
        ));
    }

    #[test]
    fn length_prefixed_frames_carry_newlines() {
        let mut buf = Vec::new();
        Framing::LengthPrefixed.write(&mut buf, b"{\n}").unwrap();
        Framing::LengthPrefixed.write(&mut buf, b"[]").unwrap();
        assert_eq!(buf, b"3\r\n\r\n{\n}2\r\n\r\n[]");
        let mut r = io::Cursor::new(buf);
        assert_eq!(
            Framing::LengthPrefixed.read(&mut r).unwrap().unwrap(),
            b"{\n}"
        );
        assert_eq!(
            Framing::LengthPrefixed.read(&mut r).unwrap().unwrap(),
            b"[]"
        );
        assert_eq!(Framing::LengthPrefixed.read(&mut r).unwrap(), None);
    }

    #[test]
    fn line_frames_skip_blank_lines() {
        let mut r = io::Cursor::new(b"\n{}\r\n\n[]\n".to_vec());
        assert_eq!(Framing::Lines.read(&mut r).unwrap().unwrap(), b"{}");
        assert_eq!(Framing::Lines.read(&mut r).unwrap().unwrap(), b"[]");
        assert_eq!(Framing::Lines.read(&mut r).unwrap(), None);
    }
}

//! Client transports.
//!
//! Endpoint addresses are `tcp://host:port` or `stdio:<command> [args...]`;
//! the latter spawns the command and talks to it over its stdin/stdout.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde_json::Value;

use crate::codec::{self, Framing, Message, Request};
use crate::error::ErrorObject;
use crate::router::{class_of, MethodClass, Router};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote error: {0}")]
    Remote(ErrorObject),
}

pub trait Transport: Send {
    fn address(&self) -> &str;
    fn call(&mut self, method: &str, params: Value) -> Result<Value, ClientError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn address(&self) -> &str {
        (**self).address()
    }
    fn call(&mut self, method: &str, params: Value) -> Result<Value, ClientError> {
        (**self).call(method, params)
    }
}

fn unwrap_response(bytes: &[u8], id: i64) -> Result<Value, ClientError> {
    match codec::decode(bytes) {
        Ok(Message::Response(r)) if r.id == Some(id) => r.outcome.map_err(ClientError::Remote),
        Ok(Message::Response(r)) => match r.outcome {
            Err(e) => Err(ClientError::Remote(e)),
            Ok(_) => Err(ClientError::Protocol(format!(
                "response id {:?} does not match {id}",
                r.id
            ))),
        },
        Ok(Message::Request(_)) => Err(ClientError::Protocol(
            "expected a response, got a request".into(),
        )),
        Err(e) => Err(ClientError::Protocol(e.to_string())),
    }
}

fn exchange(
    reader: &mut impl BufRead,
    writer: &mut impl Write,
    framing: Framing,
    id: i64,
    method: &str,
    params: Value,
) -> Result<Value, ClientError> {
    let body = codec::encode(&Message::Request(Request::new(id, method, params)));
    framing
        .write(writer, &body)
        .map_err(|e| ClientError::Unreachable(e.to_string()))?;
    let reply = framing
        .read(reader)
        .map_err(|e| ClientError::Unreachable(e.to_string()))?
        .ok_or_else(|| ClientError::Unreachable("connection closed".into()))?;
    unwrap_response(&reply, id)
}

/// Connects on first use so that an absent server surfaces as a call error.
pub struct TcpClient {
    address: String,
    target: String,
    conn: Option<(BufReader<TcpStream>, TcpStream)>,
    next_id: i64,
}

impl TcpClient {
    pub fn new(target: impl Into<String>) -> Self {
        let target = target.into();
        Self {
            address: format!("tcp://{target}"),
            target,
            conn: None,
            next_id: 1,
        }
    }
}

impl Transport for TcpClient {
    fn address(&self) -> &str {
        &self.address
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, ClientError> {
        if self.conn.is_none() {
            let stream = TcpStream::connect(&self.target)
                .map_err(|e| ClientError::Unreachable(format!("{}: {e}", self.target)))?;
            let _ = stream.set_nodelay(true);
            let read = stream
                .try_clone()
                .map_err(|e| ClientError::Unreachable(e.to_string()))?;
            self.conn = Some((BufReader::new(read), stream));
        }
        let (reader, writer) = self.conn.as_mut().expect("connected above");
        let id = self.next_id;
        self.next_id += 1;
        let result = exchange(reader, writer, Framing::LengthPrefixed, id, method, params);
        if matches!(result, Err(ClientError::Unreachable(_))) {
            self.conn = None;
        }
        result
    }
}

/// A server running as a child process.
pub struct StdioClient {
    address: String,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    next_id: i64,
}

impl StdioClient {
    pub fn spawn(command_line: &str) -> Result<Self, ClientError> {
        Self::spawn_in(command_line, None)
    }

    /// Spawn with `dir` as the working directory, so relative paths in the
    /// command resolve against it.
    pub fn spawn_in(command_line: &str, dir: Option<&Path>) -> Result<Self, ClientError> {
        let mut words = command_line.split_whitespace();
        let program = words
            .next()
            .ok_or_else(|| ClientError::Unreachable("empty stdio command".into()))?;
        let mut command = Command::new(program);
        if let Some(dir) = dir {
            command.current_dir(dir);
        }
        let mut child = command
            .args(words)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ClientError::Unreachable(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(Self {
            address: format!("stdio:{command_line}"),
            child,
            stdin,
            stdout,
            next_id: 1,
        })
    }
}

impl Transport for StdioClient {
    fn address(&self) -> &str {
        &self.address
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        exchange(
            &mut self.stdout,
            &mut self.stdin,
            Framing::Lines,
            id,
            method,
            params,
        )
    }
}

impl Drop for StdioClient {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// In-process server; every call still goes through the codec.
pub struct LocalClient {
    address: String,
    router: Arc<Router>,
    next_id: i64,
}

impl LocalClient {
    pub fn new(name: &str, router: Arc<Router>) -> Self {
        Self {
            address: format!("local:{name}"),
            router,
            next_id: 1,
        }
    }
}

impl Transport for LocalClient {
    fn address(&self) -> &str {
        &self.address
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        let body = codec::encode(&Message::Request(Request::new(id, method, params)));
        unwrap_response(&self.router.handle(&body), id)
    }
}

/// Shared tally of calls per method class.
#[derive(Debug, Clone, Default)]
pub struct CallCounts(Arc<Mutex<BTreeMap<MethodClass, usize>>>);

impl CallCounts {
    pub fn get(&self, class: MethodClass) -> usize {
        self.0
            .lock()
            .expect("counter poisoned")
            .get(&class)
            .copied()
            .unwrap_or(0)
    }

    pub fn reset(&self) {
        self.0.lock().expect("counter poisoned").clear();
    }

    fn bump(&self, class: MethodClass) {
        *self
            .0
            .lock()
            .expect("counter poisoned")
            .entry(class)
            .or_default() += 1;
    }
}

/// Wraps a transport and counts every call it forwards.
pub struct CountingClient<T> {
    inner: T,
    counts: CallCounts,
}

impl<T: Transport> CountingClient<T> {
    pub fn new(inner: T, counts: CallCounts) -> Self {
        Self { inner, counts }
    }
}

impl<T: Transport> Transport for CountingClient<T> {
    fn address(&self) -> &str {
        self.inner.address()
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, ClientError> {
        self.counts.bump(class_of(method));
        self.inner.call(method, params)
    }
}

/// Open a transport for an endpoint address.
pub fn connect(address: &str) -> Result<Box<dyn Transport>, ClientError> {
    connect_in(address, None)
}

/// As [`connect`], running stdio commands from `dir`.
pub fn connect_in(address: &str, dir: Option<&Path>) -> Result<Box<dyn Transport>, ClientError> {
    if let Some(target) = address.strip_prefix("tcp://") {
        Ok(Box::new(TcpClient::new(target)))
    } else if let Some(command) = address.strip_prefix("stdio:") {
        Ok(Box::new(StdioClient::spawn_in(command, dir)?))
    } else {
        Err(ClientError::Unreachable(format!(
            "unsupported endpoint address {address:?}; use tcp://host:port or stdio:<command>"
        )))
    }
}

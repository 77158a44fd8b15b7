//! Method registry: names map to boxed handlers, dispatch is a lookup.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::codec::{self, Message, Request, Response};
use crate::error::{self, ErrorObject};

pub const SERVER_INFO: &str = "dalia/server_info";
pub const LIST_CAPABILITIES: &str = "dalia/list_capabilities";
pub const LIST_TASKS: &str = "atdp/list_tasks";
pub const INVOKE: &str = "dalia/invoke";
pub const LIST_AGENTS: &str = "directory/list_agents";
pub const REGISTER_AGENT: &str = "directory/register_agent";
pub const REMOVE_AGENT: &str = "directory/remove_agent";
pub const BIND_SERVER: &str = "directory/bind_server";
pub const RESOLVE: &str = "directory/resolve";
pub const EXECUTABLE_CAPABILITIES: &str = "directory/executable_capabilities";
pub const SNAPSHOT: &str = "directory/snapshot";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MethodClass {
    /// Reads declarations or directory state.
    Discovery,
    /// Runs a capability.
    Execution,
    /// Changes directory state.
    Write,
}

/// Class of a method name; unknown names count as discovery so that a
/// stray probe is never mistaken for harmless traffic.
pub fn class_of(method: &str) -> MethodClass {
    match method {
        INVOKE => MethodClass::Execution,
        REGISTER_AGENT | REMOVE_AGENT | BIND_SERVER => MethodClass::Write,
        _ => MethodClass::Discovery,
    }
}

pub trait Method: Send + Sync {
    fn call(&self, params: &Value) -> Result<Value, ErrorObject>;
}

impl<F> Method for F
where
    F: Fn(&Value) -> Result<Value, ErrorObject> + Send + Sync,
{
    fn call(&self, params: &Value) -> Result<Value, ErrorObject> {
        self(params)
    }
}

#[derive(Default)]
pub struct Router {
    methods: BTreeMap<String, Box<dyn Method>>,
}

impl Router {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, method: impl Method + 'static) -> &mut Self {
        self.methods.insert(name.to_string(), Box::new(method));
        self
    }

    pub fn method_names(&self) -> impl Iterator<Item = &str> {
        self.methods.keys().map(String::as_str)
    }

    pub fn dispatch(&self, request: &Request) -> Response {
        let Some(method) = self.methods.get(&request.method) else {
            return Response::err(
                Some(request.id),
                ErrorObject::new(
                    error::METHOD_NOT_FOUND,
                    format!("method not found: {}", request.method),
                ),
            );
        };
        Response {
            id: Some(request.id),
            outcome: method.call(&request.params),
        }
    }

    /// One framed body in, one framed body out.
    pub fn handle(&self, body: &[u8]) -> Vec<u8> {
        let response = match codec::decode(body) {
            Ok(Message::Request(r)) => self.dispatch(&r),
            Ok(Message::Response(r)) => Response::err(
                r.id,
                ErrorObject::new(error::INVALID_REQUEST, "servers accept requests only"),
            ),
            Err(e) => e.to_response(),
        };
        codec::encode(&Message::Response(response))
    }
}

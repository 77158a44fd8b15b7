//! Core endpoint traits implemented over a [`Transport`].

use std::collections::BTreeMap;

use dalia_core::{
    load_snapshot, Capability, CapabilityEndpoint, CapabilityId, DirectoryEndpoint,
    DirectorySnapshot, EndpointError, InvokeError, Invoker, ServerId, SlotName, TaskDeclaration,
};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::client::{ClientError, Transport};
use crate::router;

impl From<ClientError> for EndpointError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Unreachable(m) => EndpointError::Unreachable(m),
            ClientError::Protocol(m) => EndpointError::Protocol(m),
            ClientError::Remote(e) => EndpointError::Protocol(e.to_string()),
        }
    }
}

fn typed<T: DeserializeOwned>(
    transport: &mut dyn Transport,
    method: &str,
) -> Result<T, EndpointError> {
    let v = transport.call(method, json!({}))?;
    serde_json::from_value(v).map_err(|e| EndpointError::Protocol(format!("{method}: {e}")))
}

pub struct RemoteServer {
    transport: Box<dyn Transport>,
    server_id: Option<ServerId>,
}

impl RemoteServer {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            server_id: None,
        }
    }

    /// The transport keyed by the server id it reported, once known.
    pub fn into_route(self) -> Option<(ServerId, Box<dyn Transport>)> {
        let id = self.server_id?;
        Some((id, self.transport))
    }
}

impl CapabilityEndpoint for RemoteServer {
    fn address(&self) -> &str {
        self.transport.address()
    }

    fn server_id(&mut self) -> Result<ServerId, EndpointError> {
        #[derive(serde::Deserialize)]
        struct Info {
            server_id: ServerId,
        }
        let info: Info = typed(self.transport.as_mut(), router::SERVER_INFO)?;
        self.server_id = Some(info.server_id.clone());
        Ok(info.server_id)
    }

    fn list_capabilities(&mut self) -> Result<Vec<Capability>, EndpointError> {
        let caps: Vec<Capability> = typed(self.transport.as_mut(), router::LIST_CAPABILITIES)?;
        for cap in &caps {
            let report = dalia_core::validate_capability(cap);
            if !report.is_ok() {
                return Err(EndpointError::Protocol(format!(
                    "invalid capability {}: {report}",
                    cap.capability_id
                )));
            }
        }
        Ok(caps)
    }

    fn list_tasks(&mut self) -> Result<Vec<TaskDeclaration>, EndpointError> {
        let tasks: Vec<TaskDeclaration> = typed(self.transport.as_mut(), router::LIST_TASKS)?;
        for task in &tasks {
            let report = dalia_core::atdp::validate_task(task);
            if !report.is_ok() {
                return Err(EndpointError::Protocol(format!(
                    "invalid task {}: {report}",
                    task.task_id
                )));
            }
        }
        Ok(tasks)
    }
}

pub struct RemoteDirectory {
    transport: Box<dyn Transport>,
}

impl RemoteDirectory {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self { transport }
    }
}

impl DirectoryEndpoint for RemoteDirectory {
    fn address(&self) -> &str {
        self.transport.address()
    }

    fn snapshot(&mut self) -> Result<DirectorySnapshot, EndpointError> {
        let v = self.transport.call(router::SNAPSHOT, json!({}))?;
        let bytes = serde_json::to_vec(&v).expect("JSON values serialize");
        load_snapshot(&bytes).map_err(|e| EndpointError::Protocol(e.to_string()))
    }
}

/// Sends each step to the transport registered for its server.
#[derive(Default)]
pub struct WireInvoker {
    routes: BTreeMap<ServerId, Box<dyn Transport>>,
}

impl WireInvoker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(&mut self, server: ServerId, transport: Box<dyn Transport>) {
        self.routes.insert(server, transport);
    }

    pub fn from_servers(servers: Vec<RemoteServer>) -> Self {
        let mut me = Self::new();
        for (id, t) in servers.into_iter().filter_map(RemoteServer::into_route) {
            me.route(id, t);
        }
        me
    }
}

impl Invoker for WireInvoker {
    fn invoke(
        &mut self,
        server: &ServerId,
        capability: &CapabilityId,
        inputs: &BTreeMap<SlotName, Value>,
    ) -> Result<BTreeMap<String, Value>, InvokeError> {
        let transport = self
            .routes
            .get_mut(server)
            .ok_or_else(|| InvokeError::new(format!("no route to server {server}")))?;
        let params = json!({ "capability_id": capability, "inputs": inputs });
        match transport.call(router::INVOKE, params) {
            Ok(Value::Object(m)) => Ok(m.into_iter().collect()),
            Ok(other) => Err(InvokeError::new(format!(
                "invoke returned a non-object: {other}"
            ))),
            Err(ClientError::Remote(e)) => Err(InvokeError {
                code: Some(e.code),
                message: e.message,
            }),
            Err(e) => Err(InvokeError::new(e.to_string())),
        }
    }
}

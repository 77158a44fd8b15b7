//! Discovery: query every endpoint once and seal the answers into an
//! immutable [`ExecutionContext`].
//!
//! Planning and execution only ever read a sealed context. Nothing in this
//! crate past [`discover`] talks to an endpoint for metadata again.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::atdp::{check_feasibility, FeasibilityReport, TaskDeclaration};
use crate::canonical::{digest_hex, to_canonical_bytes};
use crate::capability::Capability;
use crate::directory::DirectorySnapshot;
use crate::ident::{CapabilityId, ServerId, SlotName, TaskId};

static SEAL_SEQUENCE: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EndpointError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiscoveryError {
    #[error("EndpointUnreachable: {endpoint}: {reason}")]
    EndpointUnreachable { endpoint: String, reason: String },
    #[error("DuplicateCapabilityId: {id} declared by both {first} and {second}")]
    DuplicateCapabilityId {
        id: CapabilityId,
        first: ServerId,
        second: ServerId,
    },
    #[error("DuplicateTaskId: {id} declared by both {first} and {second}")]
    DuplicateTaskId {
        id: TaskId,
        first: ServerId,
        second: ServerId,
    },
    #[error("DuplicateServerId: {0} answered on more than one endpoint")]
    DuplicateServerId(ServerId),
    #[error("ProtocolError: {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },
}

impl DiscoveryError {
    fn from_endpoint(endpoint: &str, e: EndpointError) -> Self {
        match e {
            EndpointError::Unreachable(reason) => DiscoveryError::EndpointUnreachable {
                endpoint: endpoint.to_string(),
                reason,
            },
            EndpointError::Protocol(message) => DiscoveryError::Protocol {
                endpoint: endpoint.to_string(),
                message,
            },
        }
    }
}

/// A server exposing capability and task declarations.
pub trait CapabilityEndpoint {
    fn address(&self) -> &str;
    fn server_id(&mut self) -> Result<ServerId, EndpointError>;
    fn list_capabilities(&mut self) -> Result<Vec<Capability>, EndpointError>;
    fn list_tasks(&mut self) -> Result<Vec<TaskDeclaration>, EndpointError>;
}

/// An agent directory service.
pub trait DirectoryEndpoint {
    fn address(&self) -> &str;
    fn snapshot(&mut self) -> Result<DirectorySnapshot, EndpointError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProvidedCapability {
    pub capability: Capability,
    pub provider: ServerId,
}

/// The closed world planning operates in.
#[derive(Debug, Clone)]
pub struct ExecutionContext {
    capabilities: BTreeMap<CapabilityId, ProvidedCapability>,
    tasks: BTreeMap<TaskId, TaskDeclaration>,
    directory: DirectorySnapshot,
    provided_inputs: BTreeSet<SlotName>,
    feasibility: BTreeMap<TaskId, FeasibilityReport>,
    sealed_at: u64,
}

#[derive(Serialize)]
struct FingerprintView<'a> {
    capabilities: Vec<&'a ProvidedCapability>,
    tasks: Vec<&'a TaskDeclaration>,
    directory: &'a DirectorySnapshot,
}

#[derive(Serialize)]
struct ContentView<'a> {
    capabilities: Vec<&'a ProvidedCapability>,
    tasks: Vec<&'a TaskDeclaration>,
    directory: &'a DirectorySnapshot,
    provided_inputs: &'a BTreeSet<SlotName>,
    feasibility: &'a BTreeMap<TaskId, FeasibilityReport>,
}

impl ExecutionContext {
    /// Build and seal a context from already-collected declarations.
    pub fn seal(
        declared: Vec<(ServerId, Vec<Capability>, Vec<TaskDeclaration>)>,
        directory: DirectorySnapshot,
        provided_inputs: BTreeSet<SlotName>,
    ) -> Result<Self, DiscoveryError> {
        let mut capabilities: BTreeMap<CapabilityId, ProvidedCapability> = BTreeMap::new();
        let mut tasks: BTreeMap<TaskId, (TaskDeclaration, ServerId)> = BTreeMap::new();
        for (server, caps, decls) in declared {
            for cap in caps {
                if let Some(prev) = capabilities.get(&cap.capability_id) {
                    return Err(DiscoveryError::DuplicateCapabilityId {
                        id: cap.capability_id.clone(),
                        first: prev.provider.clone(),
                        second: server,
                    });
                }
                capabilities.insert(
                    cap.capability_id.clone(),
                    ProvidedCapability {
                        capability: cap,
                        provider: server.clone(),
                    },
                );
            }
            for task in decls {
                if let Some((_, prev)) = tasks.get(&task.task_id) {
                    return Err(DiscoveryError::DuplicateTaskId {
                        id: task.task_id.clone(),
                        first: prev.clone(),
                        second: server,
                    });
                }
                tasks.insert(task.task_id.clone(), (task, server.clone()));
            }
        }
        let tasks: BTreeMap<TaskId, TaskDeclaration> =
            tasks.into_iter().map(|(k, (t, _))| (k, t)).collect();
        let feasibility = tasks
            .iter()
            .map(|(id, t)| {
                let report = check_feasibility(
                    t,
                    capabilities.values().map(|p| &p.capability),
                    &provided_inputs,
                );
                (id.clone(), report)
            })
            .collect();
        Ok(Self {
            capabilities,
            tasks,
            directory,
            provided_inputs,
            feasibility,
            sealed_at: SEAL_SEQUENCE.fetch_add(1, Ordering::Relaxed),
        })
    }

    pub fn capability(&self, id: &CapabilityId) -> Option<&Capability> {
        self.capabilities.get(id).map(|p| &p.capability)
    }

    pub fn provider(&self, id: &CapabilityId) -> Option<&ServerId> {
        self.capabilities.get(id).map(|p| &p.provider)
    }

    pub fn capabilities(&self) -> impl Iterator<Item = &ProvidedCapability> {
        self.capabilities.values()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskDeclaration> {
        self.tasks.values()
    }

    pub fn task(&self, id: &TaskId) -> Option<&TaskDeclaration> {
        self.tasks.get(id)
    }

    pub fn directory(&self) -> &DirectorySnapshot {
        &self.directory
    }

    pub fn provided_inputs(&self) -> &BTreeSet<SlotName> {
        &self.provided_inputs
    }

    pub fn feasibility(&self, task: &TaskId) -> Option<&FeasibilityReport> {
        self.feasibility.get(task)
    }

    pub fn sealed_at(&self) -> u64 {
        self.sealed_at
    }

    /// Everything except `sealed_at`, canonically encoded.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        to_canonical_bytes(&ContentView {
            capabilities: self.capabilities.values().collect(),
            tasks: self.tasks.values().collect(),
            directory: &self.directory,
            provided_inputs: &self.provided_inputs,
            feasibility: &self.feasibility,
        })
    }

    /// Hex SHA-256 over the canonical capabilities, tasks and directory.
    pub fn fingerprint(&self) -> String {
        digest_hex(&to_canonical_bytes(&FingerprintView {
            capabilities: self.capabilities.values().collect(),
            tasks: self.tasks.values().collect(),
            directory: &self.directory,
        }))
    }
}

/// Phase one. Either every endpoint answers and a sealed context is
/// returned, or nothing is.
pub fn discover(
    servers: &mut [&mut dyn CapabilityEndpoint],
    directory: &mut dyn DirectoryEndpoint,
    provided_inputs: BTreeSet<SlotName>,
) -> Result<ExecutionContext, DiscoveryError> {
    let mut declared = Vec::with_capacity(servers.len());
    let mut seen_servers = BTreeSet::new();
    for endpoint in servers.iter_mut() {
        let addr = endpoint.address().to_string();
        let wrap = |e| DiscoveryError::from_endpoint(&addr, e);
        let server_id = endpoint.server_id().map_err(wrap)?;
        if !seen_servers.insert(server_id.clone()) {
            return Err(DiscoveryError::DuplicateServerId(server_id));
        }
        let caps = endpoint.list_capabilities().map_err(wrap)?;
        let tasks = endpoint.list_tasks().map_err(wrap)?;
        declared.push((server_id, caps, tasks));
    }
    let addr = directory.address().to_string();
    let snapshot = directory
        .snapshot()
        .map_err(|e| DiscoveryError::from_endpoint(&addr, e))?;
    ExecutionContext::seal(declared, snapshot, provided_inputs)
}

//! Federated agent directory.
//!
//! The directory links agents to the servers they may access and servers to
//! the capability ids they expose. It never stores capability bodies; an
//! agent's executable capabilities are always derived on demand.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_bytes;
use crate::ident::{CapabilityId, ServerId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DirectoryError {
    #[error("InvalidRecord: {0}")]
    InvalidRecord(String),
    #[error("InvalidCapabilityId: {0}")]
    InvalidCapabilityId(String),
    #[error("InvalidServerId: {0}")]
    InvalidServerId(String),
    #[error("UnknownAgent: {0}")]
    UnknownAgent(String),
    #[error("MalformedDocument: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRecord {
    pub agent_id: String,
    pub role: String,
    pub domains: Vec<String>,
    pub accessible_servers: Vec<ServerId>,
}

impl AgentRecord {
    pub fn validate(&self) -> Result<(), DirectoryError> {
        if self.agent_id.is_empty() {
            return Err(DirectoryError::InvalidRecord("agent_id is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.accessible_servers {
            s.check()
                .map_err(|e| DirectoryError::InvalidRecord(format!("server {s}: {e}")))?;
            if !seen.insert(s) {
                return Err(DirectoryError::InvalidRecord(format!(
                    "server {s} listed twice in accessible_servers"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirectorySnapshot {
    pub agents: BTreeMap<String, AgentRecord>,
    pub server_capabilities: BTreeMap<ServerId, Vec<CapabilityId>>,
    pub origin: String,
}

impl DirectorySnapshot {
    pub fn new(origin: impl Into<String>) -> Self {
        Self {
            origin: origin.into(),
            ..Self::default()
        }
    }

    /// Insert or wholesale-replace an agent. Servers it names that the
    /// directory has not seen become known with no capabilities.
    pub fn register_agent(&self, record: AgentRecord) -> Result<Self, DirectoryError> {
        record.validate()?;
        let mut next = self.clone();
        for server in &record.accessible_servers {
            next.server_capabilities.entry(server.clone()).or_default();
        }
        next.agents.insert(record.agent_id.clone(), record);
        Ok(next)
    }

    /// Server entries are kept: servers outlive agents.
    pub fn remove_agent(&self, agent_id: &str) -> Self {
        let mut next = self.clone();
        next.agents.remove(agent_id);
        next
    }

    pub fn bind_server_capabilities(
        &self,
        server_id: &ServerId,
        capability_ids: Vec<CapabilityId>,
    ) -> Result<Self, DirectoryError> {
        server_id
            .check()
            .map_err(|e| DirectoryError::InvalidServerId(e.to_string()))?;
        let mut seen = BTreeSet::new();
        for id in &capability_ids {
            id.check()
                .map_err(|e| DirectoryError::InvalidCapabilityId(e.to_string()))?;
            if !seen.insert(id) {
                return Err(DirectoryError::InvalidCapabilityId(format!(
                    "{id} bound twice to {server_id}"
                )));
            }
        }
        let mut next = self.clone();
        next.server_capabilities
            .insert(server_id.clone(), capability_ids);
        Ok(next)
    }

    /// Union of the capability ids bound to the agent's servers, sorted.
    pub fn executable_capabilities(
        &self,
        agent_id: &str,
    ) -> Result<Vec<CapabilityId>, DirectoryError> {
        let agent = self
            .agents
            .get(agent_id)
            .ok_or_else(|| DirectoryError::UnknownAgent(agent_id.to_string()))?;
        Ok(self.capabilities_via(agent).into_iter().cloned().collect())
    }

    fn capabilities_via(&self, agent: &AgentRecord) -> BTreeSet<&CapabilityId> {
        agent
            .accessible_servers
            .iter()
            .filter_map(|s| self.server_capabilities.get(s))
            .flatten()
            .collect()
    }

    /// Agents able to execute `capability_id`, sorted by agent id.
    pub fn resolve_capability(&self, capability_id: &CapabilityId) -> Vec<String> {
        self.agents
            .values()
            .filter(|a| self.capabilities_via(a).contains(capability_id))
            .map(|a| a.agent_id.clone())
            .collect()
    }

    /// Federate several directories. Earlier snapshots win agent id
    /// collisions; server bindings are unioned and sorted.
    ///
    /// # Panics
    /// If `snapshots` is empty.
    pub fn merge(snapshots: &[DirectorySnapshot]) -> DirectorySnapshot {
        assert!(!snapshots.is_empty(), "merge needs at least one snapshot");
        let mut agents = BTreeMap::new();
        let mut servers: BTreeMap<ServerId, BTreeSet<CapabilityId>> = BTreeMap::new();
        for snap in snapshots {
            for (id, rec) in &snap.agents {
                agents.entry(id.clone()).or_insert_with(|| rec.clone());
            }
            for (server, caps) in &snap.server_capabilities {
                servers
                    .entry(server.clone())
                    .or_default()
                    .extend(caps.iter().cloned());
            }
        }
        let origins: Vec<&str> = snapshots.iter().map(|s| s.origin.as_str()).collect();
        DirectorySnapshot {
            agents,
            server_capabilities: servers
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
            origin: format!("federation({})", origins.join(",")),
        }
    }

    /// Equality ignoring `origin`.
    pub fn same_entries(&self, other: &DirectorySnapshot) -> bool {
        self.agents == other.agents && self.server_capabilities == other.server_capabilities
    }

    fn check_server_refs(&self) -> Result<(), DirectoryError> {
        for agent in self.agents.values() {
            for s in &agent.accessible_servers {
                if !self.server_capabilities.contains_key(s) {
                    return Err(DirectoryError::Malformed(format!(
                        "agent {} references server {s} missing from servers",
                        agent.agent_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Serializes as `{origin, agents, servers}` without the derived view.
impl Serialize for DirectorySnapshot {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entries<'a> {
            origin: &'a str,
            agents: &'a BTreeMap<String, AgentRecord>,
            servers: &'a BTreeMap<ServerId, Vec<CapabilityId>>,
        }
        Entries {
            origin: &self.origin,
            agents: &self.agents,
            servers: &self.server_capabilities,
        }
        .serialize(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersistedSnapshot {
    origin: String,
    agents: BTreeMap<String, AgentRecord>,
    servers: BTreeMap<ServerId, Vec<CapabilityId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    derived: Option<DerivedView>,
}

/// Emitted for human inspection only; ignored on load.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DerivedView {
    executable_capabilities: BTreeMap<String, Vec<CapabilityId>>,
}

/// Canonical JSON with agents and servers sorted by key.
pub fn save_snapshot(snapshot: &DirectorySnapshot) -> Vec<u8> {
    let derived = DerivedView {
        executable_capabilities: snapshot
            .agents
            .values()
            .map(|a| {
                let caps = snapshot.capabilities_via(a).into_iter().cloned().collect();
                (a.agent_id.clone(), caps)
            })
            .collect(),
    };
    to_canonical_bytes(&PersistedSnapshot {
        origin: snapshot.origin.clone(),
        agents: snapshot.agents.clone(),
        servers: snapshot.server_capabilities.clone(),
        derived: Some(derived),
    })
}

pub fn load_snapshot(bytes: &[u8]) -> Result<DirectorySnapshot, DirectoryError> {
    let p: PersistedSnapshot =
        serde_json::from_slice(bytes).map_err(|e| DirectoryError::Malformed(e.to_string()))?;
    let mut snap = DirectorySnapshot::new(p.origin);
    snap.server_capabilities = p.servers;
    for (key, rec) in p.agents {
        if key != rec.agent_id {
            return Err(DirectoryError::Malformed(format!(
                "agent key {key} does not match agent_id {}",
                rec.agent_id
            )));
        }
        rec.validate()
            .map_err(|e| DirectoryError::Malformed(e.to_string()))?;
        snap.agents.insert(key, rec);
    }
    for (server, caps) in &snap.server_capabilities {
        let unique: BTreeSet<_> = caps.iter().collect();
        if unique.len() != caps.len() {
            return Err(DirectoryError::Malformed(format!(
                "server {server} lists a capability twice"
            )));
        }
    }
    snap.check_server_refs()?;
    Ok(snap)
}

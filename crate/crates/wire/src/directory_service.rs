//! The agent directory as a served resource.
//!
//! Reads take the current snapshot; writes hold one lock for
//! apply-then-persist so they are serialized across connections.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use dalia_core::{
    load_snapshot, save_snapshot, AgentRecord, CapabilityId, DirectoryError, DirectorySnapshot,
    ServerId,
};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::error::{self, ErrorObject};
use crate::router::{self, Router};

pub struct DirectoryService {
    state: Mutex<DirectorySnapshot>,
    persist_to: Option<PathBuf>,
}

impl DirectoryService {
    pub fn new(snapshot: DirectorySnapshot) -> Self {
        Self {
            state: Mutex::new(snapshot),
            persist_to: None,
        }
    }

    /// Load `path` if it exists, otherwise start empty; every write is
    /// saved back to `path`.
    pub fn open(path: &Path) -> Result<Self, DirectoryError> {
        let snapshot = match std::fs::read(path) {
            Ok(bytes) => load_snapshot(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => DirectorySnapshot::new("local"),
            Err(e) => {
                return Err(DirectoryError::Malformed(format!(
                    "{}: {e}",
                    path.display()
                )))
            }
        };
        Ok(Self {
            state: Mutex::new(snapshot),
            persist_to: Some(path.to_path_buf()),
        })
    }

    pub fn snapshot(&self) -> DirectorySnapshot {
        self.state.lock().expect("directory lock poisoned").clone()
    }

    fn write(
        &self,
        change: impl FnOnce(&DirectorySnapshot) -> Result<DirectorySnapshot, DirectoryError>,
    ) -> Result<Value, ErrorObject> {
        let mut state = self.state.lock().expect("directory lock poisoned");
        let next = change(&state)?;
        if let Some(path) = &self.persist_to {
            std::fs::write(path, save_snapshot(&next)).map_err(|e| {
                ErrorObject::new(
                    error::SERVER_ERROR,
                    format!("cannot persist directory: {e}"),
                )
            })?;
        }
        *state = next;
        Ok(json!({ "ok": true }))
    }

    pub fn into_router(self) -> Router {
        let this = Arc::new(self);
        let mut r = Router::new();

        let s = Arc::clone(&this);
        r.register(router::LIST_AGENTS, move |_: &Value| {
            let agents: Vec<AgentRecord> = s.snapshot().agents.into_values().collect();
            Ok(serde_json::to_value(agents).expect("serializable"))
        });

        let s = Arc::clone(&this);
        r.register(router::REGISTER_AGENT, move |p: &Value| {
            let raw = p
                .get("record")
                .ok_or_else(|| ErrorObject::invalid_params("missing record"))?;
            let record: AgentRecord = serde_json::from_value(raw.clone())
                .map_err(|e| ErrorObject::from(DirectoryError::InvalidRecord(e.to_string())))?;
            s.write(|snap| snap.register_agent(record))
        });

        let s = Arc::clone(&this);
        r.register(router::REMOVE_AGENT, move |p: &Value| {
            let agent_id: String = field(p, "agent_id")?;
            s.write(|snap| Ok(snap.remove_agent(&agent_id)))
        });

        let s = Arc::clone(&this);
        r.register(router::BIND_SERVER, move |p: &Value| {
            let server: String = field(p, "server_id")?;
            let server = ServerId::new(server)
                .map_err(|e| ErrorObject::from(DirectoryError::InvalidServerId(e.to_string())))?;
            let ids: Vec<String> = field(p, "capability_ids")?;
            let ids = ids
                .into_iter()
                .map(CapabilityId::new)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| {
                    ErrorObject::from(DirectoryError::InvalidCapabilityId(e.to_string()))
                })?;
            s.write(|snap| snap.bind_server_capabilities(&server, ids))
        });

        let s = Arc::clone(&this);
        r.register(router::RESOLVE, move |p: &Value| {
            let id: String = field(p, "capability_id")?;
            let id = CapabilityId::new(id).map_err(|e| {
                ErrorObject::from(DirectoryError::InvalidCapabilityId(e.to_string()))
            })?;
            Ok(json!(s.snapshot().resolve_capability(&id)))
        });

        let s = Arc::clone(&this);
        r.register(router::EXECUTABLE_CAPABILITIES, move |p: &Value| {
            let agent_id: String = field(p, "agent_id")?;
            let caps = s.snapshot().executable_capabilities(&agent_id)?;
            Ok(serde_json::to_value(caps).expect("serializable"))
        });

        let s = this;
        r.register(router::SNAPSHOT, move |_: &Value| {
            let bytes = save_snapshot(&s.snapshot());
            Ok(serde_json::from_slice(&bytes).expect("saved snapshots are JSON"))
        });
        r
    }
}

fn field<T: DeserializeOwned>(params: &Value, name: &str) -> Result<T, ErrorObject> {
    let v = params
        .get(name)
        .ok_or_else(|| ErrorObject::invalid_params(format!("missing {name}")))?;
    serde_json::from_value(v.clone())
        .map_err(|e| ErrorObject::invalid_params(format!("{name}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Request;
    use crate::fixtures;

    fn call(r: &Router, method: &str, params: Value) -> Result<Value, ErrorObject> {
        r.dispatch(&Request::new(1, method, params)).outcome
    }

    fn listing_record() -> Value {
        json!({
            "agent_id": "RestaurantAgent",
            "role": "task_executor",
            "domains": ["food"],
            "accessible_servers": ["mcp_food_server", "mcp_map_server"]
        })
    }

    #[test]
    fn register_then_resolve() {
        let r = DirectoryService::new(DirectorySnapshot::new("t")).into_router();
        call(
            &r,
            router::REGISTER_AGENT,
            json!({ "record": listing_record() }),
        )
        .unwrap();
        let bind = json!({"server_id": "mcp_food_server", "capability_ids": ["restaurant.search", "restaurant.reserve"]});
        call(&r, router::BIND_SERVER, bind).unwrap();
        let got = call(
            &r,
            router::RESOLVE,
            json!({"capability_id": "restaurant.search"}),
        )
        .unwrap();
        assert_eq!(got, json!(["RestaurantAgent"]));
        let exec = call(
            &r,
            router::EXECUTABLE_CAPABILITIES,
            json!({"agent_id": "RestaurantAgent"}),
        )
        .unwrap();
        assert_eq!(exec, json!(["restaurant.reserve", "restaurant.search"]));
    }

    #[test]
    fn empty_directory_resolves_nothing() {
        let r = DirectoryService::new(DirectorySnapshot::new("t")).into_router();
        let got = call(
            &r,
            router::RESOLVE,
            json!({"capability_id": "restaurant.search"}),
        )
        .unwrap();
        assert_eq!(got, json!([]));
        assert_eq!(
            call(&r, router::LIST_AGENTS, Value::Null).unwrap(),
            json!([])
        );
    }

    #[test]
    fn register_remove_register_matches_single_register() {
        let once = DirectoryService::new(DirectorySnapshot::new("t")).into_router();
        call(
            &once,
            router::REGISTER_AGENT,
            json!({ "record": listing_record() }),
        )
        .unwrap();
        let thrice = DirectoryService::new(DirectorySnapshot::new("t")).into_router();
        call(
            &thrice,
            router::REGISTER_AGENT,
            json!({ "record": listing_record() }),
        )
        .unwrap();
        call(
            &thrice,
            router::REMOVE_AGENT,
            json!({ "agent_id": "RestaurantAgent" }),
        )
        .unwrap();
        call(
            &thrice,
            router::REGISTER_AGENT,
            json!({ "record": listing_record() }),
        )
        .unwrap();
        let a = serde_json::to_vec(&call(&once, router::SNAPSHOT, Value::Null).unwrap()).unwrap();
        let b = serde_json::to_vec(&call(&thrice, router::SNAPSHOT, Value::Null).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_codes() {
        let r = DirectoryService::new(fixtures::scenario_directory()).into_router();
        let mut bad = listing_record();
        bad["accessible_servers"] = json!(["a", "a"]);
        let e = call(&r, router::REGISTER_AGENT, json!({ "record": bad })).unwrap_err();
        assert_eq!(e.code, error::INVALID_RECORD);
        let e = call(
            &r,
            router::BIND_SERVER,
            json!({"server_id": "s", "capability_ids": ["Bad.Id"]}),
        )
        .unwrap_err();
        assert_eq!(e.code, error::INVALID_CAPABILITY_ID);
        let e = call(
            &r,
            router::EXECUTABLE_CAPABILITIES,
            json!({"agent_id": "Nobody"}),
        )
        .unwrap_err();
        assert_eq!(e.code, error::UNKNOWN_AGENT);
        let e = call(
            &r,
            router::BIND_SERVER,
            json!({"server_id": "Food", "capability_ids": []}),
        )
        .unwrap_err();
        assert_eq!(e.code, error::INVALID_SERVER_ID);
        let e = call(&r, router::RESOLVE, json!({})).unwrap_err();
        assert_eq!(e.code, error::INVALID_PARAMS);
    }

    #[test]
    fn writes_are_persisted() {
        let dir = std::env::temp_dir().join(format!("dalia-dir-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("snapshot.json");
        let _ = std::fs::remove_file(&path);
        let r = DirectoryService::open(&path).unwrap().into_router();
        call(
            &r,
            router::REGISTER_AGENT,
            json!({ "record": listing_record() }),
        )
        .unwrap();
        let reopened = DirectoryService::open(&path).unwrap();
        assert_eq!(reopened.snapshot().agents.len(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn invalid_snapshot_file() {
        let dir = std::env::temp_dir().join(format!("dalia-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("snapshot.json");
        std::fs::write(&path, b"{\"origin\":1}").unwrap();
        let e = DirectoryService::open(&path).err().unwrap();
        assert_eq!(ErrorObject::from(e).code, error::INVALID_SNAPSHOT);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

//! A capability server: declarations plus invocation behaviour, exposed
//! through a [`Router`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, Mutex};

use dalia_core::atdp::validate_task;
use dalia_core::{Capability, CapabilityId, ServerId, SlotName, TaskDeclaration};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{self, ErrorObject};
use crate::handler::{Behavior, HandlerRegistry};
use crate::router::{self, Router};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub server_id: ServerId,
    pub capabilities: Vec<Capability>,
    #[serde(default)]
    pub tasks: Vec<TaskDeclaration>,
    #[serde(default)]
    pub handlers: BTreeMap<CapabilityId, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ConfigInvalid: {}", .0.join("; "))]
pub struct ConfigError(pub Vec<String>);

impl ServerConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(vec![e.to_string()]))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_json(&text)
    }

    /// Every problem that would stop the server from starting.
    pub fn problems(&self, registry: &HandlerRegistry) -> Vec<String> {
        let mut out = Vec::new();
        let mut declared = BTreeSet::new();
        for cap in &self.capabilities {
            if !declared.insert(&cap.capability_id) {
                out.push(format!("capability {} declared twice", cap.capability_id));
            }
            let report = dalia_core::validate_capability(cap);
            if !report.is_ok() {
                out.push(format!("capability {}: {report}", cap.capability_id));
            }
        }
        let mut task_ids = BTreeSet::new();
        for task in &self.tasks {
            if !task_ids.insert(&task.task_id) {
                out.push(format!("task {} declared twice", task.task_id));
            }
            let report = validate_task(task);
            if !report.is_ok() {
                out.push(format!("task {}: {report}", task.task_id));
            }
            for id in task.capabilities.iter().filter(|id| !declared.contains(id)) {
                out.push(format!(
                    "task {} references capability {id} not declared by {}",
                    task.task_id, self.server_id
                ));
            }
        }
        for id in self.handlers.keys().filter(|id| !declared.contains(id)) {
            out.push(format!("handler for undeclared capability {id}"));
        }
        for cap in &self.capabilities {
            if let Err(e) = registry.build(cap, self.handlers.get(&cap.capability_id)) {
                out.push(e);
            }
        }
        out
    }
}

pub struct CapabilityServer {
    config: ServerConfig,
    behaviors: BTreeMap<CapabilityId, Box<dyn Behavior>>,
    calls: Mutex<BTreeMap<CapabilityId, usize>>,
}

impl CapabilityServer {
    pub fn new(config: ServerConfig) -> Result<Self, ConfigError> {
        Self::with_registry(config, &HandlerRegistry::default())
    }

    /// Refuses to start on any configuration problem.
    pub fn with_registry(
        config: ServerConfig,
        registry: &HandlerRegistry,
    ) -> Result<Self, ConfigError> {
        let problems = config.problems(registry);
        if !problems.is_empty() {
            return Err(ConfigError(problems));
        }
        let behaviors = config
            .capabilities
            .iter()
            .map(|c| {
                let b = registry
                    .build(c, config.handlers.get(&c.capability_id))
                    .expect("checked by problems()");
                (c.capability_id.clone(), b)
            })
            .collect();
        Ok(Self {
            config,
            behaviors,
            calls: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn server_id(&self) -> &ServerId {
        &self.config.server_id
    }

    pub fn invoke(&self, params: &Value) -> Result<Value, ErrorObject> {
        let (cap, inputs) = self.invoke_params(params)?;
        let call = {
            let mut calls = self.calls.lock().expect("call counter poisoned");
            let n = calls.entry(cap.capability_id.clone()).or_default();
            *n += 1;
            *n
        };
        let outputs = self.behaviors[&cap.capability_id].respond(call, &inputs)?;
        Ok(Value::Object(outputs.into_iter().collect()))
    }

    fn invoke_params(
        &self,
        params: &Value,
    ) -> Result<(&Capability, BTreeMap<SlotName, Value>), ErrorObject> {
        let id = params
            .get("capability_id")
            .and_then(Value::as_str)
            .ok_or_else(|| ErrorObject::invalid_params("capability_id must be a string"))?;
        let cap = self
            .config
            .capabilities
            .iter()
            .find(|c| c.capability_id.as_str() == id)
            .ok_or_else(|| {
                ErrorObject::new(
                    error::UNKNOWN_CAPABILITY,
                    format!("unknown capability: {id}"),
                )
            })?;
        let raw = match params.get("inputs") {
            Some(Value::Object(m)) => m.clone(),
            None => Default::default(),
            Some(_) => return Err(ErrorObject::invalid_params("inputs must be an object")),
        };
        let mut inputs = BTreeMap::new();
        for (k, v) in raw {
            match k.parse::<SlotName>() {
                Ok(slot) if cap.consumes(&slot) => {
                    inputs.insert(slot, v);
                }
                _ => {
                    return Err(ErrorObject::invalid_params(format!(
                        "undeclared input {k} for {id}"
                    )))
                }
            }
        }
        if let Some(missing) = cap.inputs.iter().find(|s| !inputs.contains_key(*s)) {
            return Err(ErrorObject::new(
                error::MISSING_INPUT,
                format!("missing input: {missing}"),
            ));
        }
        Ok((cap, inputs))
    }

    pub fn into_router(self) -> Router {
        let this = Arc::new(self);
        let mut r = Router::new();
        let s = Arc::clone(&this);
        r.register(router::SERVER_INFO, move |_: &Value| {
            Ok(json!({ "server_id": s.config.server_id }))
        });
        let s = Arc::clone(&this);
        r.register(router::LIST_CAPABILITIES, move |_: &Value| {
            Ok(serde_json::to_value(&s.config.capabilities).expect("serializable"))
        });
        let s = Arc::clone(&this);
        r.register(router::LIST_TASKS, move |_: &Value| {
            Ok(serde_json::to_value(&s.config.tasks).expect("serializable"))
        });
        let s = this;
        r.register(router::INVOKE, move |p: &Value| s.invoke(p));
        r
    }
}

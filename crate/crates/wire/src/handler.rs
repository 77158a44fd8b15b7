//! Invocation behaviours for served capabilities.
//!
//! A handler entry in a server config is an object of directives, for
//! example `{"script": [...], "fail_on": [2]}`. Each directive name maps to
//! a factory that wraps the behaviour built so far, so directives compose
//! and new ones can be registered without touching the server.

use std::collections::{BTreeMap, BTreeSet};

use dalia_core::{Capability, CapabilityId, SlotName};
use serde_json::{Map, Value};

use crate::error::{self, ErrorObject};

pub type Outputs = BTreeMap<String, Value>;

pub trait Behavior: Send + Sync {
    /// `call` counts invocations of this capability from 1, failed ones included.
    fn respond(
        &self,
        call: usize,
        inputs: &BTreeMap<SlotName, Value>,
    ) -> Result<Outputs, ErrorObject>;
}

/// Answers each declared output with `"<capability>/<slot>"`.
pub struct DefaultOutputs {
    capability: CapabilityId,
    outputs: Vec<SlotName>,
}

impl DefaultOutputs {
    pub fn new(cap: &Capability) -> Self {
        Self {
            capability: cap.capability_id.clone(),
            outputs: cap.outputs.clone(),
        }
    }
}

impl Behavior for DefaultOutputs {
    fn respond(
        &self,
        _call: usize,
        _inputs: &BTreeMap<SlotName, Value>,
    ) -> Result<Outputs, ErrorObject> {
        Ok(self
            .outputs
            .iter()
            .map(|s| {
                (
                    s.to_string(),
                    Value::String(format!("{}/{s}", self.capability)),
                )
            })
            .collect())
    }
}

/// The n-th call returns the n-th entry; the last entry repeats.
struct Scripted {
    script: Vec<Map<String, Value>>,
}

impl Behavior for Scripted {
    fn respond(
        &self,
        call: usize,
        _inputs: &BTreeMap<SlotName, Value>,
    ) -> Result<Outputs, ErrorObject> {
        let i = call.clamp(1, self.script.len()) - 1;
        Ok(self.script[i].clone().into_iter().collect())
    }
}

struct FailOn {
    calls: BTreeSet<usize>,
    inner: Box<dyn Behavior>,
}

impl Behavior for FailOn {
    fn respond(
        &self,
        call: usize,
        inputs: &BTreeMap<SlotName, Value>,
    ) -> Result<Outputs, ErrorObject> {
        if self.calls.contains(&call) {
            return Err(ErrorObject::new(
                error::HANDLER_FAULT,
                format!("injected fault on invocation {call}"),
            ));
        }
        self.inner.respond(call, inputs)
    }
}

pub type Factory = fn(&Value, Box<dyn Behavior>) -> Result<Box<dyn Behavior>, String>;

fn script_factory(directives: &Value, _inner: Box<dyn Behavior>) -> Result<Box<dyn Behavior>, String> {
    let Value::Array(entries) = directives else {
        return Err("script must be an array of output objects".into());
    };
    if entries.is_empty() {
        return Err("script must not be empty".into());
    }
    let script = entries
        .iter()
        .enumerate()
        .map(|(i, e)| match e {
            Value::Object(m) => Ok(m.clone()),
            _ => Err(format!("script[{i}] is not an object")),
        })
        .collect::<Result<_, _>>()?;
    Ok(Box::new(Scripted { script }))
}

fn fail_on_factory(directives: &Value, inner: Box<dyn Behavior>) -> Result<Box<dyn Behavior>, String> {
    let Value::Array(entries) = directives else {
        return Err("fail_on must be an array of invocation numbers".into());
    };
    let calls = entries
        .iter()
        .map(|e| match e.as_u64() {
            Some(n) if n >= 1 => Ok(n as usize),
            _ => Err(format!("fail_on entry {e} is not a positive integer")),
        })
        .collect::<Result<_, _>>()?;
    Ok(Box::new(FailOn { calls, inner }))
}

/// Directive name to factory, applied in ascending rank.
pub struct HandlerRegistry {
    directives: BTreeMap<String, (u32, Factory)>,
}

impl Default for HandlerRegistry {
    fn default() -> Self {
        let mut r = Self {
            directives: BTreeMap::new(),
        };
        r.register("script", 10, script_factory);
        r.register("fail_on", 20, fail_on_factory);
        r
    }
}

impl HandlerRegistry {
    pub fn register(&mut self, directive: &str, rank: u32, factory: Factory) {
        self.directives
            .insert(directive.to_string(), (rank, factory));
    }

    pub fn build(
        &self,
        cap: &Capability,
        directives: Option<&Value>,
    ) -> Result<Box<dyn Behavior>, String> {
        let mut behavior: Box<dyn Behavior> = Box::new(DefaultOutputs::new(cap));
        let Some(directives) = directives else {
            return Ok(behavior);
        };
        let Value::Object(directives) = directives else {
            return Err(format!(
                "handler for {} must be an object",
                cap.capability_id
            ));
        };
        let mut layers = Vec::new();
        for (name, arg) in directives {
            let (rank, factory) = self.directives.get(name).ok_or_else(|| {
                format!(
                    "handler for {}: unknown directive {name:?}",
                    cap.capability_id
                )
            })?;
            layers.push((*rank, *factory, arg));
        }
        layers.sort_by_key(|(rank, _, _)| *rank);
        for (_, factory, arg) in layers {
            behavior = factory(arg, behavior)
                .map_err(|e| format!("handler for {}: {e}", cap.capability_id))?;
        }
        Ok(behavior)
    }
}

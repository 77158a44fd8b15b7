//! A deterministic in-process invoker with fault injection.

use std::collections::BTreeMap;

use dalia_core::{Capability, CapabilityId, InvokeError, Invoker, ServerId, SlotName};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    /// The k-th invocation overall (1-based) returns an error.
    FailOnCall(usize),
    /// This capability answers without one of its declared outputs.
    DropOutput(CapabilityId),
    /// This capability answers with an extra, undeclared slot.
    ExtraOutput(CapabilityId),
}

/// Answers every declared output with `"<capability>/<slot>"`.
#[derive(Debug, Clone, Default)]
pub struct MockInvoker {
    catalog: BTreeMap<CapabilityId, Capability>,
    faults: Vec<Fault>,
    pub calls: Vec<(ServerId, CapabilityId)>,
}

impl MockInvoker {
    pub fn new<'a>(catalog: impl IntoIterator<Item = &'a Capability>) -> Self {
        Self {
            catalog: catalog
                .into_iter()
                .map(|c| (c.capability_id.clone(), c.clone()))
                .collect(),
            faults: Vec::new(),
            calls: Vec::new(),
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.faults.push(fault);
        self
    }
}

pub fn default_value(capability: &CapabilityId, slot: &SlotName) -> Value {
    Value::String(format!("{capability}/{slot}"))
}

impl Invoker for MockInvoker {
    fn invoke(
        &mut self,
        server: &ServerId,
        capability: &CapabilityId,
        _inputs: &BTreeMap<SlotName, Value>,
    ) -> Result<BTreeMap<String, Value>, InvokeError> {
        self.calls.push((server.clone(), capability.clone()));
        let n = self.calls.len();
        if self.faults.contains(&Fault::FailOnCall(n)) {
            return Err(InvokeError {
                code: Some(-32003),
                message: format!("injected fault on invocation {n}"),
            });
        }
        let cap = self
            .catalog
            .get(capability)
            .ok_or_else(|| InvokeError::new(format!("unknown capability {capability}")))?;
        let mut out: BTreeMap<String, Value> = cap
            .outputs
            .iter()
            .map(|s| (s.to_string(), default_value(capability, s)))
            .collect();
        if self.faults.contains(&Fault::DropOutput(capability.clone())) {
            if let Some(first) = cap.outputs.first() {
                out.remove(first.as_str());
            }
        }
        if self
            .faults
            .contains(&Fault::ExtraOutput(capability.clone()))
        {
            out.insert("undeclared_extra".into(), Value::Bool(true));
        }
        Ok(out)
    }
}

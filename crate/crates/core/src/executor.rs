//! Controlled execution of a validated task graph.
//!
//! Nodes run one at a time in canonical order. Bindings are write-once and
//! facts only grow. The first failure aborts the run and every later step
//! is recorded as skipped; nothing is retried.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::to_canonical_bytes;
use crate::discovery::ExecutionContext;
use crate::document::{ValidationReport, Violation};
use crate::graph::{NodeId, TaskGraph};
use crate::ident::{CapabilityId, FactToken, ServerId, SlotName};
use crate::planner::{validate_graph, Goal};

pub use crate::graph::canonical_order;

/// Routes a capability call to the server providing it. Implementations
/// must not perform discovery.
pub trait Invoker {
    fn invoke(
        &mut self,
        server: &ServerId,
        capability: &CapabilityId,
        inputs: &BTreeMap<SlotName, Value>,
    ) -> Result<BTreeMap<String, Value>, InvokeError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct InvokeError {
    pub code: Option<i64>,
    pub message: String,
}

impl InvokeError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            code: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecuteError {
    #[error("malformed graph: {0}")]
    MalformedGraph(ValidationReport),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BindingEnv {
    values: BTreeMap<SlotName, Value>,
}

impl BindingEnv {
    pub fn get(&self, slot: &SlotName) -> Option<&Value> {
        self.values.get(slot)
    }

    /// Refuses to overwrite.
    pub fn bind(&mut self, slot: SlotName, value: Value) -> Result<(), SlotName> {
        if self.values.contains_key(&slot) {
            return Err(slot);
        }
        self.values.insert(slot, value);
        Ok(())
    }

    pub fn into_inner(self) -> BTreeMap<SlotName, Value> {
        self.values
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactSet {
    facts: BTreeSet<FactToken>,
}

impl FactSet {
    pub fn contains(&self, f: &FactToken) -> bool {
        self.facts.contains(f)
    }

    pub fn assert(&mut self, f: FactToken) {
        self.facts.insert(f);
    }

    pub fn snapshot(&self) -> Vec<FactToken> {
        self.facts.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Succeeded,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub node_id: NodeId,
    pub capability_id: CapabilityId,
    pub agent_id: String,
    pub status: StepStatus,
    pub inputs_used: BTreeMap<SlotName, Value>,
    pub outputs_received: BTreeMap<SlotName, Value>,
    pub error: Option<String>,
    /// Fact set after the step ran; empty for skipped steps.
    pub facts_after: Vec<FactToken>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub graph_fingerprint: String,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub final_bindings: BTreeMap<SlotName, Value>,
}

impl ExecutionTrace {
    pub fn canonical_json(&self) -> Vec<u8> {
        to_canonical_bytes(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

fn skipped(node_id: NodeId, capability_id: CapabilityId, agent_id: String) -> StepRecord {
    StepRecord {
        node_id,
        capability_id,
        agent_id,
        status: StepStatus::Skipped,
        inputs_used: BTreeMap::new(),
        outputs_received: BTreeMap::new(),
        error: None,
        facts_after: Vec::new(),
    }
}

/// Run `graph` against `invoker`. Only a structurally malformed graph is an
/// error; every runtime failure is recorded in the trace.
pub fn execute(
    graph: &TaskGraph,
    goal: &Goal,
    ctx: &ExecutionContext,
    invoker: &mut dyn Invoker,
) -> Result<ExecutionTrace, ExecuteError> {
    let mut structural = validate_graph(graph, goal, ctx);
    structural.violations.retain(|v| v.field != "preconditions");
    for n in graph
        .nodes
        .iter()
        .filter(|n| n.agent_id.is_none() || n.server_id.is_none())
    {
        structural.push(Violation::invariant(
            "assignment",
            format!("node {} has no agent or server", n.node_id),
        ));
    }
    if !structural.is_ok() {
        return Err(ExecuteError::MalformedGraph(structural));
    }
    let order = canonical_order(graph).expect("validated graph is acyclic");

    let mut env = BindingEnv::default();
    for (slot, value) in &goal.bindings {
        env.bind(slot.clone(), value.clone())
            .expect("goal bindings are unique");
    }
    let mut facts = FactSet::default();
    for f in goal.bootstrap_facts() {
        facts.assert(f);
    }

    let mut steps = Vec::with_capacity(order.len());
    let mut aborted = false;
    for id in order {
        let node = graph.node(id).expect("ordered ids come from the graph");
        let agent = node.agent_id.clone().unwrap_or_default();
        if aborted {
            steps.push(skipped(id, node.capability_id.clone(), agent));
            continue;
        }
        let cap = ctx.capability(&node.capability_id).expect("grounded");
        let server = node.server_id.as_ref().expect("assigned");

        let mut inputs_used = BTreeMap::new();
        for slot in &cap.inputs {
            if let Some(v) = env.get(slot) {
                inputs_used.insert(slot.clone(), v.clone());
            }
        }
        let mut step = StepRecord {
            node_id: id,
            capability_id: node.capability_id.clone(),
            agent_id: agent,
            status: StepStatus::Failed,
            inputs_used,
            outputs_received: BTreeMap::new(),
            error: None,
            facts_after: Vec::new(),
        };

        let outcome = run_step(cap, server, &step.inputs_used, &facts, invoker);
        match outcome.and_then(|outputs| bind_outputs(outputs, &mut env)) {
            Ok(received) => {
                for f in &cap.postconditions {
                    facts.assert(f.clone());
                }
                for slot in received.keys() {
                    facts.assert(slot.known_fact());
                }
                step.status = StepStatus::Succeeded;
                step.outputs_received = received;
            }
            Err(message) => {
                step.error = Some(message);
                aborted = true;
            }
        }
        step.facts_after = facts.snapshot();
        steps.push(step);
    }

    Ok(ExecutionTrace {
        graph_fingerprint: graph.fingerprint(),
        steps,
        outcome: if aborted {
            Outcome::Aborted
        } else {
            Outcome::Completed
        },
        final_bindings: env.into_inner(),
    })
}

fn run_step(
    cap: &crate::capability::Capability,
    server: &ServerId,
    inputs: &BTreeMap<SlotName, Value>,
    facts: &FactSet,
    invoker: &mut dyn Invoker,
) -> Result<BTreeMap<SlotName, Value>, String> {
    if let Some(missing) = cap.inputs.iter().find(|s| !inputs.contains_key(*s)) {
        return Err(format!("input {missing} is not bound"));
    }
    if let Some(pre) = cap.preconditions.iter().find(|f| !facts.contains(f)) {
        return Err(format!("precondition not satisfied: {pre}"));
    }
    let mut raw = invoker
        .invoke(server, &cap.capability_id, inputs)
        .map_err(|e| match e.code {
            Some(code) => format!("invocation failed ({code}): {}", e.message),
            None => format!("invocation failed: {}", e.message),
        })?;
    let mut outputs = BTreeMap::new();
    for slot in &cap.outputs {
        match raw.remove(slot.as_str()) {
            Some(v) => {
                outputs.insert(slot.clone(), v);
            }
            None => return Err(format!("missing declared output: {slot}")),
        }
    }
    if let Some(extra) = raw.keys().next() {
        return Err(format!("undeclared output: {extra}"));
    }
    Ok(outputs)
}

fn bind_outputs(
    outputs: BTreeMap<SlotName, Value>,
    env: &mut BindingEnv,
) -> Result<BTreeMap<SlotName, Value>, String> {
    if let Some(slot) = outputs.keys().find(|s| env.get(s).is_some()) {
        return Err(format!("slot {slot} is already bound"));
    }
    for (slot, v) in &outputs {
        env.bind(slot.clone(), v.clone()).expect("checked above");
    }
    Ok(outputs)
}

/// Check that `trace` is a faithful run of `graph`.
pub fn replay_check(trace: &ExecutionTrace, graph: &TaskGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    if trace.graph_fingerprint != graph.fingerprint() {
        report.push(Violation::invariant(
            "fingerprint",
            "trace was produced by a different graph",
        ));
    }

    match canonical_order(graph) {
        Ok(order) => {
            let seen: Vec<NodeId> = trace.steps.iter().map(|s| s.node_id).collect();
            if seen != order {
                report.push(Violation::invariant(
                    "order",
                    format!("steps ran as {seen:?}, canonical order is {order:?}"),
                ));
            }
        }
        Err(e) => report.push(Violation::invariant("order", e.to_string())),
    }
    for step in &trace.steps {
        match graph.node(step.node_id) {
            Some(n)
                if n.capability_id == step.capability_id
                    && n.agent_id.as_deref() == Some(step.agent_id.as_str()) => {}
            _ => report.push(Violation::invariant(
                "order",
                format!("step for node {} does not match the graph", step.node_id),
            )),
        }
    }

    // abort-prefix shape
    let first_bad = trace
        .steps
        .iter()
        .position(|s| s.status != StepStatus::Succeeded);
    let shape_ok = match first_bad {
        None => trace.outcome == Outcome::Completed,
        Some(i) => {
            trace.outcome == Outcome::Aborted
                && trace.steps[i].status == StepStatus::Failed
                && trace.steps[i + 1..]
                    .iter()
                    .all(|s| s.status == StepStatus::Skipped)
        }
    };
    if !shape_ok {
        report.push(Violation::invariant(
            "outcome",
            "steps do not form succeeded*, failed, skipped*",
        ));
    }
    for s in &trace.steps {
        let bad = match s.status {
            StepStatus::Failed => s.error.is_none(),
            StepStatus::Skipped => {
                !s.inputs_used.is_empty() || !s.outputs_received.is_empty() || s.error.is_some()
            }
            StepStatus::Succeeded => s.error.is_some(),
        };
        if bad {
            report.push(Violation::invariant(
                "outcome",
                format!(
                    "step {} carries fields inconsistent with its status",
                    s.node_id
                ),
            ));
        }
    }

    // write-once bindings and data flow
    let mut writer: BTreeMap<&SlotName, NodeId> = BTreeMap::new();
    for s in trace
        .steps
        .iter()
        .filter(|s| s.status == StepStatus::Succeeded)
    {
        for (slot, v) in &s.outputs_received {
            if let Some(prev) = writer.insert(slot, s.node_id) {
                report.push(Violation::invariant(
                    "write_once",
                    format!("slot {slot} written by nodes {prev} and {}", s.node_id),
                ));
            }
            if trace.final_bindings.get(slot) != Some(v) {
                report.push(Violation::invariant(
                    "write_once",
                    format!(
                        "final value of {slot} differs from what node {} produced",
                        s.node_id
                    ),
                ));
            }
        }
    }
    for s in trace
        .steps
        .iter()
        .filter(|s| s.status == StepStatus::Succeeded)
    {
        for (slot, v) in &s.inputs_used {
            let source = graph
                .incoming(s.node_id)
                .find(|e| &e.slot == slot)
                .and_then(|e| trace.steps.iter().find(|p| p.node_id == e.from_node))
                .and_then(|p| p.outputs_received.get(slot))
                .or_else(|| trace.final_bindings.get(slot));
            if source != Some(v) {
                report.push(Violation::invariant(
                    "data_flow",
                    format!(
                        "input {slot} of node {} has no matching source value",
                        s.node_id
                    ),
                ));
            }
        }
    }

    // facts only grow
    let mut prev: Option<BTreeSet<&FactToken>> = None;
    for s in trace
        .steps
        .iter()
        .filter(|s| s.status != StepStatus::Skipped)
    {
        let cur: BTreeSet<&FactToken> = s.facts_after.iter().collect();
        if let Some(p) = &prev {
            if !p.is_subset(&cur) {
                report.push(Violation::invariant(
                    "facts",
                    format!("facts shrank at node {}", s.node_id),
                ));
            }
        }
        prev = Some(cur);
    }
    report
}

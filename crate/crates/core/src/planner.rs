//! Deterministic plan synthesis over a sealed [`ExecutionContext`].
//!
//! A goal names an intent and binds some slots. The matching task's
//! capability pool is searched backwards from the task outputs: the smallest
//! unresolved slot is taken first and its producer is the smallest capability
//! id that yields a valid graph. Every capability is instantiated at most
//! once, and node ids follow instantiation order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::atdp::{check_feasibility, FeasibilityReport, TaskDeclaration};
use crate::capability::Capability;
use crate::discovery::ExecutionContext;
use crate::document::{ValidationReport, Violation};
use crate::graph::{canonical_order, Edge, GraphError, Node, NodeId, TaskGraph};
use crate::ident::{CapabilityId, FactToken, Intent, SlotName, TaskId};

/// A structured request: which intent, with which slots already bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub intent: Intent,
    #[serde(default)]
    pub bindings: BTreeMap<SlotName, Value>,
    #[serde(default)]
    pub initial_facts: BTreeSet<FactToken>,
}

impl Goal {
    pub fn new(intent: Intent) -> Self {
        Self {
            intent,
            bindings: BTreeMap::new(),
            initial_facts: BTreeSet::new(),
        }
    }

    pub fn bind(mut self, slot: SlotName, value: impl Into<Value>) -> Self {
        self.bindings.insert(slot, value.into());
        self
    }

    pub fn bound_slots(&self) -> BTreeSet<SlotName> {
        self.bindings.keys().cloned().collect()
    }

    /// Facts true before the first node runs: the initial facts plus
    /// `<slot>_known` for every bound slot.
    pub fn bootstrap_facts(&self) -> BTreeSet<FactToken> {
        let mut facts = self.initial_facts.clone();
        facts.extend(self.bindings.keys().map(SlotName::known_fact));
        facts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("NoSuchTask: no task declares intent {0}")]
    NoSuchTask(Intent),
    #[error("AmbiguousIntent: intent declared by {}", join(.0))]
    AmbiguousIntent(Vec<TaskId>),
    #[error("TaskInfeasible: {task}: {}", .report.diagnostics.join("; "))]
    Infeasible {
        task: TaskId,
        report: Box<FeasibilityReport>,
    },
    #[error("UnproducibleSlot: {0}")]
    UnproducibleSlot(SlotName),
    #[error("CycleDetected: {}", join(.0))]
    CycleDetected(Vec<CapabilityId>),
    #[error("SlotConflict: {slot} would be written by {}", join(.writers))]
    SlotConflict {
        slot: SlotName,
        /// Capabilities writing the slot; the goal binding is listed as `goal.bindings`.
        writers: Vec<String>,
    },
    #[error("PreconditionUnschedulable: {fact} required by {capability}")]
    PreconditionUnschedulable {
        fact: FactToken,
        capability: CapabilityId,
    },
    #[error("NoEligibleAgent: {0}")]
    NoEligibleAgent(CapabilityId),
    #[error("InvalidPlan: {0}")]
    InvalidPlan(ValidationReport),
}

impl PlanError {
    /// Variant name, as printed by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            PlanError::NoSuchTask(_) => "NoSuchTask",
            PlanError::AmbiguousIntent(_) => "AmbiguousIntent",
            PlanError::Infeasible { .. } => "TaskInfeasible",
            PlanError::UnproducibleSlot(_) => "UnproducibleSlot",
            PlanError::CycleDetected(_) => "CycleDetected",
            PlanError::SlotConflict { .. } => "SlotConflict",
            PlanError::PreconditionUnschedulable { .. } => "PreconditionUnschedulable",
            PlanError::NoEligibleAgent(_) => "NoEligibleAgent",
            PlanError::InvalidPlan(_) => "InvalidPlan",
        }
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// The unique task whose intent equals the goal's.
pub fn resolve_goal<'c>(
    goal: &Goal,
    ctx: &'c ExecutionContext,
) -> Result<&'c TaskDeclaration, PlanError> {
    let matches: Vec<&TaskDeclaration> = ctx.tasks().filter(|t| t.intent == goal.intent).collect();
    match matches.as_slice() {
        [] => Err(PlanError::NoSuchTask(goal.intent.clone())),
        [one] => Ok(one),
        many => Err(PlanError::AmbiguousIntent(
            many.iter().map(|t| t.task_id.clone()).collect(),
        )),
    }
}

#[derive(Clone)]
struct Partial<'a> {
    needed: BTreeSet<SlotName>,
    resolved: BTreeSet<SlotName>,
    producer: BTreeMap<SlotName, &'a Capability>,
    instantiated: Vec<&'a Capability>,
}

struct Synthesis<'a> {
    task: &'a TaskDeclaration,
    goal: &'a Goal,
    bound: BTreeSet<SlotName>,
    /// Pool capabilities present in the context, sorted by id.
    pool: Vec<&'a Capability>,
}

impl<'a> Synthesis<'a> {
    fn start(&self) -> Partial<'a> {
        Partial {
            needed: self.task.outputs.iter().cloned().collect(),
            resolved: BTreeSet::new(),
            producer: BTreeMap::new(),
            instantiated: Vec::new(),
        }
    }

    fn next_slot(&self, p: &Partial<'a>) -> Option<SlotName> {
        p.needed
            .iter()
            .find(|s| !self.bound.contains(*s) && !p.resolved.contains(*s))
            .cloned()
    }

    fn producers(&self, slot: &SlotName) -> impl Iterator<Item = &'a Capability> + '_ {
        let slot = slot.clone();
        self.pool.iter().copied().filter(move |c| c.produces(&slot))
    }

    fn choose(p: &mut Partial<'a>, slot: SlotName, cap: &'a Capability) {
        if !p
            .instantiated
            .iter()
            .any(|c| c.capability_id == cap.capability_id)
        {
            p.instantiated.push(cap);
            p.needed.extend(cap.inputs.iter().cloned());
        }
        p.producer.insert(slot.clone(), cap);
        p.resolved.insert(slot);
    }

    /// The normative pass: always the smallest producer, no backtracking.
    fn greedy(&self) -> Result<TaskGraph, PlanError> {
        let mut p = self.start();
        while let Some(slot) = self.next_slot(&p) {
            let cap = self
                .producers(&slot)
                .next()
                .ok_or_else(|| PlanError::UnproducibleSlot(slot.clone()))?;
            Self::choose(&mut p, slot, cap);
        }
        self.finish(&p)
    }

    /// Depth-first over producer choices in ascending id order; the first
    /// complete valid graph is the lexicographically smallest choice sequence.
    fn search(&self, p: Partial<'a>) -> Option<TaskGraph> {
        let Some(slot) = self.next_slot(&p) else {
            return self.finish(&p).ok();
        };
        for cap in self.producers(&slot) {
            if self.conflicts(&p, &slot, cap) {
                continue;
            }
            let mut next = p.clone();
            Self::choose(&mut next, slot.clone(), cap);
            if let Some(g) = self.search(next) {
                return Some(g);
            }
        }
        None
    }

    /// Choices that can never lead to a single-writer graph.
    fn conflicts(&self, p: &Partial<'a>, slot: &SlotName, cap: &Capability) -> bool {
        let others = p
            .instantiated
            .iter()
            .filter(|c| c.capability_id != cap.capability_id);
        for other in others {
            if other.produces(slot) {
                return true;
            }
            if cap.outputs.iter().any(|o| other.produces(o)) {
                return true;
            }
        }
        cap.outputs.iter().any(|o| self.bound.contains(o))
    }

    fn finish(&self, p: &Partial<'a>) -> Result<TaskGraph, PlanError> {
        let ids: BTreeMap<&CapabilityId, NodeId> = p
            .instantiated
            .iter()
            .enumerate()
            .map(|(i, c)| (&c.capability_id, i as NodeId))
            .collect();
        let mut edges = Vec::new();
        let mut sources = BTreeSet::new();
        for (i, cap) in p.instantiated.iter().enumerate() {
            for slot in &cap.inputs {
                if self.bound.contains(slot) {
                    sources.insert(slot.clone());
                } else {
                    let from = p.producer[slot];
                    edges.push(Edge {
                        from_node: ids[&from.capability_id],
                        to_node: i as NodeId,
                        slot: slot.clone(),
                    });
                }
            }
        }
        edges.sort();
        let graph = TaskGraph {
            task_id: self.task.task_id.clone(),
            nodes: p
                .instantiated
                .iter()
                .enumerate()
                .map(|(i, c)| Node {
                    node_id: i as NodeId,
                    capability_id: c.capability_id.clone(),
                    agent_id: None,
                    server_id: None,
                })
                .collect(),
            edges,
            source_bindings: sources.into_iter().collect(),
        };

        let order = canonical_order(&graph).map_err(|e| match e {
            GraphError::Cycle(ids) => PlanError::CycleDetected(ids),
            other => PlanError::InvalidPlan(single(other.to_string())),
        })?;

        let mut writers: BTreeMap<&SlotName, Vec<String>> = BTreeMap::new();
        for slot in &self.bound {
            writers
                .entry(slot)
                .or_default()
                .push("goal.bindings".into());
        }
        for cap in &p.instantiated {
            for o in &cap.outputs {
                writers
                    .entry(o)
                    .or_default()
                    .push(cap.capability_id.to_string());
            }
        }
        if let Some((slot, w)) = writers.into_iter().find(|(_, w)| w.len() > 1) {
            return Err(PlanError::SlotConflict {
                slot: slot.clone(),
                writers: w,
            });
        }

        let caps: Vec<&Capability> = order.iter().map(|i| p.instantiated[*i as usize]).collect();
        if let Some((fact, cap)) = unmet_preconditions(&caps, self.goal).into_iter().next() {
            return Err(PlanError::PreconditionUnschedulable {
                fact,
                capability: cap,
            });
        }
        Ok(graph)
    }
}

fn single(message: String) -> ValidationReport {
    ValidationReport {
        violations: vec![Violation::invariant("graph", message)],
    }
}

/// Simulate facts along `caps` (already in execution order) and list every
/// precondition not yet asserted when its node runs.
fn unmet_preconditions(caps: &[&Capability], goal: &Goal) -> Vec<(FactToken, CapabilityId)> {
    let mut facts = goal.bootstrap_facts();
    let mut unmet = Vec::new();
    for cap in caps {
        for pre in &cap.preconditions {
            if !facts.contains(pre) {
                unmet.push((pre.clone(), cap.capability_id.clone()));
            }
        }
        facts.extend(cap.postconditions.iter().cloned());
        facts.extend(cap.outputs.iter().map(SlotName::known_fact));
    }
    unmet
}

/// Build the capability-grounded graph for `task`. Agents are not assigned.
pub fn synthesize_graph(
    task: &TaskDeclaration,
    goal: &Goal,
    ctx: &ExecutionContext,
) -> Result<TaskGraph, PlanError> {
    let mut pool: Vec<&Capability> = task
        .capabilities
        .iter()
        .filter_map(|id| ctx.capability(id))
        .collect();
    pool.sort_by(|a, b| a.capability_id.cmp(&b.capability_id));
    pool.dedup_by(|a, b| a.capability_id == b.capability_id);
    let synth = Synthesis {
        task,
        goal,
        bound: goal.bound_slots(),
        pool,
    };
    match synth.greedy() {
        Ok(g) => Ok(g),
        Err(first) => synth.search(synth.start()).ok_or(first),
    }
}

/// Each node gets the smallest eligible agent id and its provider server.
pub fn assign_agents(graph: &TaskGraph, ctx: &ExecutionContext) -> Result<TaskGraph, PlanError> {
    let mut out = graph.clone();
    for node in &mut out.nodes {
        let agent = ctx
            .directory()
            .resolve_capability(&node.capability_id)
            .into_iter()
            .next()
            .ok_or_else(|| PlanError::NoEligibleAgent(node.capability_id.clone()))?;
        let server = ctx
            .provider(&node.capability_id)
            .ok_or_else(|| PlanError::NoEligibleAgent(node.capability_id.clone()))?;
        node.agent_id = Some(agent);
        node.server_id = Some(server.clone());
    }
    Ok(out)
}

/// Structural and semantic checks, reporting every violation found.
pub fn validate_graph(graph: &TaskGraph, goal: &Goal, ctx: &ExecutionContext) -> ValidationReport {
    let mut report = ValidationReport::default();

    // (a) acyclicity
    let order = match canonical_order(graph) {
        Ok(o) => Some(o),
        Err(e) => {
            report.push(Violation::invariant("acyclicity", e.to_string()));
            None
        }
    };

    // (b) groundedness
    let task = ctx.task(&graph.task_id);
    if task.is_none() {
        report.push(Violation::invariant(
            "groundedness",
            format!("task {} is not in the execution context", graph.task_id),
        ));
    }
    let mut caps: BTreeMap<NodeId, &Capability> = BTreeMap::new();
    for node in &graph.nodes {
        let Some(cap) = ctx.capability(&node.capability_id) else {
            report.push(Violation::invariant(
                "groundedness",
                format!(
                    "node {} references undeclared capability {}",
                    node.node_id, node.capability_id
                ),
            ));
            continue;
        };
        caps.insert(node.node_id, cap);
        if let Some(t) = task {
            if !t.capabilities.contains(&node.capability_id) {
                report.push(Violation::invariant(
                    "groundedness",
                    format!(
                        "{} is outside the pool of task {}",
                        node.capability_id, t.task_id
                    ),
                ));
            }
        }
        if let Some(agent) = &node.agent_id {
            if !ctx
                .directory()
                .resolve_capability(&node.capability_id)
                .contains(agent)
            {
                report.push(Violation::invariant(
                    "groundedness",
                    format!("agent {agent} may not execute {}", node.capability_id),
                ));
            }
        }
        if let Some(server) = &node.server_id {
            if ctx.provider(&node.capability_id) != Some(server) {
                report.push(Violation::invariant(
                    "groundedness",
                    format!("{} is not provided by server {server}", node.capability_id),
                ));
            }
        }
    }

    // (c) input coverage and single writers
    let sources: BTreeSet<&SlotName> = graph.source_bindings.iter().collect();
    for s in &graph.source_bindings {
        if !goal.bindings.contains_key(s) {
            report.push(Violation::invariant(
                "coverage",
                format!("source binding {s} is not bound by the goal"),
            ));
        }
    }
    for e in &graph.edges {
        let ok = matches!((caps.get(&e.from_node), caps.get(&e.to_node)),
            (Some(f), Some(t)) if f.produces(&e.slot) && t.consumes(&e.slot));
        if !ok {
            report.push(Violation::invariant(
                "coverage",
                format!(
                    "edge {} -> {} cannot carry slot {}",
                    e.from_node, e.to_node, e.slot
                ),
            ));
        }
    }
    for (id, cap) in &caps {
        for slot in &cap.inputs {
            let carried = graph.incoming(*id).filter(|e| &e.slot == slot).count();
            let from_goal = sources.contains(slot);
            if carried + usize::from(from_goal) != 1 {
                report.push(Violation::invariant(
                    "coverage",
                    format!(
                        "input {slot} of node {id} has {carried} producing edge(s){}",
                        if from_goal { " and a goal binding" } else { "" }
                    ),
                ));
            }
        }
    }
    let mut writers: BTreeMap<&SlotName, usize> = BTreeMap::new();
    for s in goal.bindings.keys() {
        *writers.entry(s).or_default() += 1;
    }
    for cap in caps.values() {
        for o in &cap.outputs {
            *writers.entry(o).or_default() += 1;
        }
    }
    for (slot, n) in writers.into_iter().filter(|(_, n)| *n > 1) {
        report.push(Violation::invariant(
            "coverage",
            format!("slot {slot} has {n} writers"),
        ));
    }
    if let Some(t) = task {
        for out in &t.outputs {
            let produced = caps.values().any(|c| c.produces(out));
            if !produced && !goal.bindings.contains_key(out) {
                report.push(Violation::invariant(
                    "coverage",
                    format!("task output {out} is never produced"),
                ));
            }
        }
    }

    // (d) precondition schedulability along the canonical order
    if let Some(order) = order {
        let in_order: Vec<&Capability> =
            order.iter().filter_map(|i| caps.get(i).copied()).collect();
        for (fact, cap) in unmet_preconditions(&in_order, goal) {
            report.push(Violation::invariant(
                "preconditions",
                format!("PreconditionUnschedulable: {fact} required by {cap}"),
            ));
        }
    }
    report
}

/// Resolve, check feasibility, synthesize, assign and validate.
pub fn plan(goal: &Goal, ctx: &ExecutionContext) -> Result<TaskGraph, PlanError> {
    let task = resolve_goal(goal, ctx)?;
    let bound = goal.bound_slots();
    let cached = ctx
        .feasibility(&task.task_id)
        .filter(|_| ctx.provided_inputs() == &bound)
        .cloned();
    let report = cached.unwrap_or_else(|| {
        check_feasibility(task, ctx.capabilities().map(|p| &p.capability), &bound)
    });
    if !report.feasible {
        return Err(PlanError::Infeasible {
            task: task.task_id.clone(),
            report: Box::new(report),
        });
    }
    let graph = synthesize_graph(task, goal, ctx)?;
    let graph = assign_agents(&graph, ctx)?;
    let report = validate_graph(&graph, goal, ctx);
    if !report.is_ok() {
        return Err(PlanError::InvalidPlan(report));
    }
    Ok(graph)
}

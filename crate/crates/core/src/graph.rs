//! Task graphs: nodes are capability executions, edges are named data
//! dependencies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::canonical::{digest_hex, to_canonical_bytes};
use crate::ident::{CapabilityId, ServerId, SlotName, TaskId};

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub node_id: NodeId,
    pub capability_id: CapabilityId,
    /// `None` until agents are assigned.
    pub agent_id: Option<String>,
    pub server_id: Option<ServerId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub slot: SlotName,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskGraph {
    pub task_id: TaskId,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Goal-bound slots consumed by some node, sorted.
    pub source_bindings: Vec<SlotName>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("CycleDetected: {}", join(.0))]
    Cycle(Vec<CapabilityId>),
    #[error("edge {from} -> {to} references a missing node")]
    DanglingEdge { from: NodeId, to: NodeId },
    #[error("node id {0} used twice")]
    DuplicateNode(NodeId),
}

fn join(ids: &[CapabilityId]) -> String {
    ids.iter()
        .map(|i| i.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

impl TaskGraph {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.node_id == id)
    }

    pub fn incoming(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to_node == id)
    }

    pub fn canonical_json(&self) -> Vec<u8> {
        to_canonical_bytes(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn fingerprint(&self) -> String {
        digest_hex(&self.canonical_json())
    }

    /// DOT digraph; node labels are `capability@agent`, edge labels slots.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", self.task_id);
        let _ = writeln!(out, "  rankdir=LR;");
        for n in &self.nodes {
            let agent = n.agent_id.as_deref().unwrap_or("unassigned");
            let _ = writeln!(
                out,
                "  n{} [label=\"{}@{}\"];",
                n.node_id,
                n.capability_id,
                agent.replace('"', "\\\"")
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}\"];",
                e.from_node, e.to_node, e.slot
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Kahn's algorithm with the ready set ordered by `(capability_id, node_id)`.
/// The result is the unique lexicographically smallest topological order
/// under that key.
pub fn canonical_order(graph: &TaskGraph) -> Result<Vec<NodeId>, GraphError> {
    let mut key: BTreeMap<NodeId, &CapabilityId> = BTreeMap::new();
    for n in &graph.nodes {
        if key.insert(n.node_id, &n.capability_id).is_some() {
            return Err(GraphError::DuplicateNode(n.node_id));
        }
    }
    let mut indegree: BTreeMap<NodeId, usize> = key.keys().map(|k| (*k, 0)).collect();
    let mut successors: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for e in &graph.edges {
        if !key.contains_key(&e.from_node) || !key.contains_key(&e.to_node) {
            return Err(GraphError::DanglingEdge {
                from: e.from_node,
                to: e.to_node,
            });
        }
        *indegree.get_mut(&e.to_node).unwrap() += 1;
        successors.entry(e.from_node).or_default().push(e.to_node);
    }

    let mut ready: BTreeSet<(&CapabilityId, NodeId)> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| (key[id], *id))
        .collect();
    let mut order = Vec::with_capacity(key.len());
    while let Some(next) = ready.pop_first() {
        let id = next.1;
        order.push(id);
        for succ in successors.get(&id).into_iter().flatten() {
            let d = indegree.get_mut(succ).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert((key[succ], *succ));
            }
        }
    }
    if order.len() != key.len() {
        let done: BTreeSet<NodeId> = order.into_iter().collect();
        let mut stuck: Vec<CapabilityId> = key
            .iter()
            .filter(|(id, _)| !done.contains(id))
            .map(|(_, c)| (*c).clone())
            .collect();
        stuck.sort();
        return Err(GraphError::Cycle(stuck));
    }
    Ok(order)
}

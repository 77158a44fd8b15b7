//! Brute-force reference answers.
//!
//! Each function here enumerates a whole search space (permutations,
//! subsets, topological orders) instead of searching it, so it is slow
//! and only meant for small instances.

use std::collections::{BTreeMap, BTreeSet};

use dalia_core::{
    Capability, CapabilityId, DirectorySnapshot, Edge, FactToken, Goal, Node, NodeId, SlotName,
    TaskDeclaration, TaskGraph,
};

/// Every ordering of `items`.
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Slots available after firing `caps` once each in the given order; a
/// capability fires only if every input is available at its turn.
pub fn fire_in_order(caps: &[&Capability], provided: &BTreeSet<SlotName>) -> BTreeSet<SlotName> {
    let mut have = provided.clone();
    for cap in caps {
        if cap.inputs.iter().all(|s| have.contains(s)) {
            have.extend(cap.outputs.iter().cloned());
        }
    }
    have
}

/// Feasibility verdict computed by trying every firing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    pub missing_capabilities: Vec<CapabilityId>,
    pub uncovered_outputs: Vec<SlotName>,
    pub unreachable_inputs: Vec<SlotName>,
}

pub fn feasibility(
    task: &TaskDeclaration,
    catalog: &[Capability],
    provided: &BTreeSet<SlotName>,
) -> Feasibility {
    let mut missing = BTreeSet::new();
    let mut present: Vec<&Capability> = Vec::new();
    for id in &task.capabilities {
        match catalog.iter().find(|c| &c.capability_id == id) {
            Some(c) if !present.iter().any(|p| p.capability_id == c.capability_id) => {
                present.push(c)
            }
            Some(_) => {}
            None => {
                missing.insert(id.clone());
            }
        }
    }
    let mut reachable = provided.clone();
    for order in permutations(&present) {
        reachable.extend(fire_in_order(&order, provided));
    }
    let uncovered: BTreeSet<SlotName> = task
        .outputs
        .iter()
        .filter(|s| !present.iter().any(|c| c.outputs.contains(s)))
        .cloned()
        .collect();
    let unreachable: BTreeSet<SlotName> = present
        .iter()
        .flat_map(|c| c.inputs.iter())
        .filter(|s| !reachable.contains(*s))
        .cloned()
        .collect();
    Feasibility {
        feasible: missing.is_empty() && uncovered.is_empty() && unreachable.is_empty(),
        missing_capabilities: missing.into_iter().collect(),
        uncovered_outputs: uncovered.into_iter().collect(),
        unreachable_inputs: unreachable.into_iter().collect(),
    }
}

/// All topological orders of `graph`'s nodes.
pub fn topological_orders(graph: &TaskGraph) -> Vec<Vec<NodeId>> {
    let ids: Vec<NodeId> = graph.nodes.iter().map(|n| n.node_id).collect();
    permutations(&ids)
        .into_iter()
        .filter(|order| {
            let pos: BTreeMap<NodeId, usize> =
                order.iter().enumerate().map(|(i, n)| (*n, i)).collect();
            graph
                .edges
                .iter()
                .all(|e| pos[&e.from_node] < pos[&e.to_node])
        })
        .collect()
}

/// The order `canonical_order` must return: among all topological orders,
/// the one whose sequence of (capability id, node id) keys is smallest.
pub fn min_topological_order(graph: &TaskGraph) -> Option<Vec<NodeId>> {
    let key: BTreeMap<NodeId, (&CapabilityId, NodeId)> = graph
        .nodes
        .iter()
        .map(|n| (n.node_id, (&n.capability_id, n.node_id)))
        .collect();
    topological_orders(graph).into_iter().min_by(|a, b| {
        let ka: Vec<_> = a.iter().map(|n| key[n]).collect();
        let kb: Vec<_> = b.iter().map(|n| key[n]).collect();
        ka.cmp(&kb)
    })
}

/// Replay facts along `caps` and report whether every precondition holds.
pub fn preconditions_hold(caps: &[&Capability], goal: &Goal) -> bool {
    let mut facts: BTreeSet<FactToken> = goal.initial_facts.clone();
    facts.extend(
        goal.bindings
            .keys()
            .map(|s| FactToken::new(format!("{s}_known")).unwrap()),
    );
    for cap in caps {
        if !cap.preconditions.iter().all(|p| facts.contains(p)) {
            return false;
        }
        facts.extend(cap.postconditions.iter().cloned());
        facts.extend(
            cap.outputs
                .iter()
                .map(|s| FactToken::new(format!("{s}_known")).unwrap()),
        );
    }
    true
}

/// One valid graph and the producer choice sequence that derives it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub key: Vec<CapabilityId>,
    pub graph: TaskGraph,
}

/// Enumerate every subset of the task's present pool and keep those that
/// form a valid single-instantiation graph:
///
/// * every slot has at most one writer, goal bindings included;
/// * every member is reached by deriving backwards from the task outputs;
/// * every input is bound by the goal or produced inside the subset;
/// * the graph is acyclic;
/// * preconditions hold along the canonical order.
///
/// Results are sorted by derivation key, so the first is the minimum.
pub fn valid_graphs(
    task: &TaskDeclaration,
    catalog: &[Capability],
    goal: &Goal,
) -> Vec<Derivation> {
    let mut pool: Vec<&Capability> = catalog
        .iter()
        .filter(|c| task.capabilities.contains(&c.capability_id))
        .collect();
    pool.sort_by(|a, b| a.capability_id.cmp(&b.capability_id));
    pool.dedup_by(|a, b| a.capability_id == b.capability_id);
    let bound: BTreeSet<&SlotName> = goal.bindings.keys().collect();

    let mut found = Vec::new();
    for mask in 0u32..(1 << pool.len()) {
        let members: Vec<&Capability> = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| *c)
            .collect();
        if let Some(d) = derive(task, &members, &bound, goal) {
            found.push(d);
        }
    }
    found.sort_by(|a, b| a.key.cmp(&b.key));
    found
}

fn derive(
    task: &TaskDeclaration,
    members: &[&Capability],
    bound: &BTreeSet<&SlotName>,
    goal: &Goal,
) -> Option<Derivation> {
    let mut writer: BTreeMap<&SlotName, &Capability> = BTreeMap::new();
    for cap in members {
        for o in &cap.outputs {
            if bound.contains(o) || writer.insert(o, cap).is_some() {
                return None;
            }
        }
    }

    let mut needed: BTreeSet<&SlotName> = task.outputs.iter().collect();
    let mut resolved: BTreeSet<&SlotName> = BTreeSet::new();
    let mut order: Vec<&Capability> = Vec::new();
    let mut key = Vec::new();
    loop {
        let next = needed
            .iter()
            .copied()
            .find(|s| !bound.contains(*s) && !resolved.contains(*s));
        let Some(slot) = next else { break };
        let cap = *writer.get(slot)?;
        key.push(cap.capability_id.clone());
        resolved.insert(slot);
        if !order.iter().any(|c| c.capability_id == cap.capability_id) {
            order.push(cap);
            needed.extend(cap.inputs.iter());
        }
    }
    if order.len() != members.len() {
        return None;
    }

    let node_of: BTreeMap<&CapabilityId, NodeId> = order
        .iter()
        .enumerate()
        .map(|(i, c)| (&c.capability_id, i as NodeId))
        .collect();
    let mut edges = Vec::new();
    let mut sources = BTreeSet::new();
    for (i, cap) in order.iter().enumerate() {
        for s in &cap.inputs {
            if bound.contains(s) {
                sources.insert(s.clone());
            } else {
                edges.push(Edge {
                    from_node: node_of[&writer[s].capability_id],
                    to_node: i as NodeId,
                    slot: s.clone(),
                });
            }
        }
    }
    edges.sort();
    let graph = TaskGraph {
        task_id: task.task_id.clone(),
        nodes: order
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

    let canonical = min_topological_order(&graph)?;
    let in_order: Vec<&Capability> = canonical.iter().map(|n| order[*n as usize]).collect();
    if !preconditions_hold(&in_order, goal) {
        return None;
    }
    Some(Derivation { key, graph })
}

/// Agents able to run `capability`, found by scanning every agent and every
/// server binding.
pub fn resolve(snapshot: &DirectorySnapshot, capability: &CapabilityId) -> Vec<String> {
    let mut out = Vec::new();
    for (agent_id, record) in &snapshot.agents {
        let reachable = record.accessible_servers.iter().any(|server| {
            snapshot
                .server_capabilities
                .get(server)
                .is_some_and(|caps| caps.contains(capability))
        });
        if reachable {
            out.push(agent_id.clone());
        }
    }
    out.sort();
    out
}

//! Seeded random instances.
//!
//! Names come from small vocabularies so that competing producers, cycles,
//! ambiguous intents, slot conflicts and unmet preconditions all show up
//! often in a few hundred draws.

use std::collections::BTreeSet;

use dalia_core::{
    AgentRecord, Capability, CapabilityId, DirectorySnapshot, DiscoveryError, ExecutionContext,
    FactToken, Goal, Intent, ServerId, SlotName, TaskDeclaration, TaskId,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SLOTS: &[&str] = &["alpha", "beta", "delta", "gamma", "kappa", "omega"];
pub const FACTS: &[&str] = &["door_open", "paid", "ready"];
pub const NAMESPACES: &[&str] = &["a", "b", "c"];
pub const NAMES: &[&str] = &["w", "x", "y", "z"];
pub const SERVERS: &[&str] = &["srv_one", "srv_two", "srv_three"];
pub const INTENTS: &[&str] = &["goal_a", "goal_b"];
pub const AGENTS: &[&str] = &["AgentA", "AgentB", "AgentC"];
/// A pool member no server ever declares.
pub const GHOST: &str = "z.ghost";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Everything discovery would collect, plus the goal to plan for.
#[derive(Debug, Clone)]
pub struct Instance {
    pub declared: Vec<(ServerId, Vec<Capability>, Vec<TaskDeclaration>)>,
    pub directory: DirectorySnapshot,
    pub goal: Goal,
}

impl Instance {
    pub fn catalog(&self) -> Vec<Capability> {
        self.declared
            .iter()
            .flat_map(|(_, c, _)| c.iter().cloned())
            .collect()
    }

    pub fn tasks(&self) -> Vec<TaskDeclaration> {
        self.declared
            .iter()
            .flat_map(|(_, _, t)| t.iter().cloned())
            .collect()
    }

    pub fn context(&self) -> Result<ExecutionContext, DiscoveryError> {
        ExecutionContext::seal(
            self.declared.clone(),
            self.directory.clone(),
            self.goal.bound_slots(),
        )
    }
}

fn subset<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T], p: f64) -> Vec<&'a T> {
    items.iter().filter(|_| rng.gen_bool(p)).collect()
}

fn pick<'a>(rng: &mut ChaCha8Rng, from: &[&'a str], lo: usize, hi: usize) -> Vec<&'a str> {
    let n = rng.gen_range(lo..=hi.min(from.len()));
    let mut v: Vec<&str> = from.choose_multiple(rng, n).copied().collect();
    v.shuffle(rng);
    v
}

fn slot(s: &str) -> SlotName {
    SlotName::new(s).unwrap()
}

fn fact(rng: &mut ChaCha8Rng) -> FactToken {
    if rng.gen_bool(0.5) {
        FactToken::new(*FACTS.choose(rng).unwrap()).unwrap()
    } else {
        slot(SLOTS.choose(rng).unwrap()).known_fact()
    }
}

pub fn capability(rng: &mut ChaCha8Rng, id: CapabilityId) -> Capability {
    // Slots are layered: inputs usually sit below outputs, so chains form
    // often; the occasional back edge keeps cycles possible.
    let lo = rng.gen_range(1..SLOTS.len());
    let hi = (lo + rng.gen_range(0..=1)).min(SLOTS.len() - 1);
    let outputs: Vec<&str> = SLOTS[lo..=hi].to_vec();
    let below: Vec<&str> = if rng.gen_bool(0.9) {
        SLOTS[..lo].to_vec()
    } else {
        SLOTS
            .iter()
            .copied()
            .filter(|s| !outputs.contains(s))
            .collect()
    };
    let inputs = pick(rng, &below, 0, 2);
    let preconditions = if rng.gen_bool(0.3) {
        vec![fact(rng)]
    } else {
        vec![]
    };
    let postconditions = if rng.gen_bool(0.3) {
        vec![FactToken::new(*FACTS.choose(rng).unwrap()).unwrap()]
    } else {
        vec![]
    };
    Capability {
        capability_id: id,
        role: "generated".into(),
        domain: "test".into(),
        inputs: inputs.into_iter().map(slot).collect(),
        outputs: outputs.into_iter().map(slot).collect(),
        preconditions,
        postconditions,
    }
}

/// Random instance with at most `max_caps` capabilities, 3 agents and 2 tasks.
pub fn instance(rng: &mut ChaCha8Rng, max_caps: usize) -> Instance {
    let mut ids: Vec<CapabilityId> = capability_ids().into_iter().collect();
    ids.shuffle(rng);
    ids.truncate(rng.gen_range(1..=max_caps));
    let caps: Vec<Capability> = ids.iter().map(|id| capability(rng, id.clone())).collect();

    let n_servers = rng.gen_range(1..=2);
    let servers: Vec<ServerId> = SERVERS[..n_servers]
        .iter()
        .map(|s| ServerId::new(*s).unwrap())
        .collect();
    let mut declared: Vec<(ServerId, Vec<Capability>, Vec<TaskDeclaration>)> = servers
        .iter()
        .map(|s| (s.clone(), vec![], vec![]))
        .collect();
    for cap in &caps {
        let i = rng.gen_range(0..n_servers);
        declared[i].1.push(cap.clone());
    }

    let n_tasks = rng.gen_range(1..=2);
    for t in 0..n_tasks {
        let mut pool: Vec<CapabilityId> = subset(rng, &ids, 0.5).into_iter().cloned().collect();
        if pool.is_empty() {
            pool.push(ids.choose(rng).unwrap().clone());
        }
        let produced: BTreeSet<&str> = caps
            .iter()
            .filter(|c| pool.contains(&c.capability_id))
            .flat_map(|c| c.outputs.iter().map(|s| s.as_str()))
            .collect();
        let produced: Vec<&str> = produced.into_iter().collect();
        let outputs = if rng.gen_bool(0.85) {
            pick(rng, &produced, 1, 2)
        } else {
            pick(rng, &SLOTS[3..], 1, 2)
        };
        let rest: Vec<&str> = SLOTS[..3]
            .iter()
            .copied()
            .filter(|s| !outputs.contains(s))
            .collect();
        let inputs = pick(rng, &rest, 0, 3);
        if rng.gen_bool(0.1) {
            pool.push(CapabilityId::new(GHOST).unwrap());
        }
        pool.shuffle(rng);
        let task = TaskDeclaration {
            task_id: TaskId::new(["t.one", "t.two"][t]).unwrap(),
            intent: Intent::new(if rng.gen_bool(0.92) {
                INTENTS[t]
            } else {
                INTENTS[1 - t]
            })
            .unwrap(),
            inputs: inputs.into_iter().map(slot).collect(),
            outputs: outputs.into_iter().map(slot).collect(),
            capabilities: pool,
        };
        let i = rng.gen_range(0..n_servers);
        declared[i].2.push(task);
    }

    let mut directory = DirectorySnapshot::new("generated");
    for (server, caps, _) in &declared {
        let bound: Vec<CapabilityId> = caps
            .iter()
            .filter(|_| rng.gen_bool(0.85))
            .map(|c| c.capability_id.clone())
            .collect();
        directory = directory.bind_server_capabilities(server, bound).unwrap();
    }
    let n_agents = rng.gen_range(0..=3);
    for agent in &AGENTS[..n_agents] {
        directory = directory
            .register_agent(agent_record(rng, agent, SERVERS))
            .unwrap();
    }

    let tasks: Vec<&TaskDeclaration> = declared.iter().flat_map(|(_, _, t)| t).collect();
    let intent = if rng.gen_bool(0.95) {
        tasks.choose(rng).unwrap().intent.clone()
    } else {
        Intent::new("goal_none").unwrap()
    };
    let wanted: Option<&TaskDeclaration> = tasks.iter().copied().find(|t| t.intent == intent);
    let mut goal = Goal::new(intent);
    for s in SLOTS {
        let s = slot(s);
        let p = match wanted {
            Some(t) if t.inputs.contains(&s) => 0.9,
            Some(t) if t.outputs.contains(&s) => 0.05,
            _ if SLOTS[..3].contains(&s.as_str()) => 0.6,
            _ => 0.2,
        };
        if rng.gen_bool(p) {
            let value = format!("v_{s}");
            goal = goal.bind(s, value);
        }
    }
    for f in FACTS {
        if rng.gen_bool(0.3) {
            goal.initial_facts.insert(FactToken::new(*f).unwrap());
        }
    }
    Instance {
        declared,
        directory,
        goal,
    }
}

pub fn agent_record(rng: &mut ChaCha8Rng, agent_id: &str, servers: &[&str]) -> AgentRecord {
    AgentRecord {
        agent_id: agent_id.to_string(),
        role: "task_executor".into(),
        domains: vec!["test".into()],
        accessible_servers: subset(rng, servers, 0.6)
            .into_iter()
            .map(|s| ServerId::new(*s).unwrap())
            .collect(),
    }
}

/// A random directory on its own: up to 3 agents over up to 3 servers.
pub fn snapshot(rng: &mut ChaCha8Rng, origin: &str) -> DirectorySnapshot {
    let all_ids: Vec<CapabilityId> = capability_ids().into_iter().collect();
    let mut snap = DirectorySnapshot::new(origin);
    for server in SERVERS {
        if rng.gen_bool(0.7) {
            let caps: Vec<CapabilityId> =
                subset(rng, &all_ids, 0.25).into_iter().cloned().collect();
            snap = snap
                .bind_server_capabilities(&ServerId::new(*server).unwrap(), caps)
                .unwrap();
        }
    }
    let n_agents = rng.gen_range(0..=3);
    let mut agents: Vec<&str> = AGENTS.to_vec();
    agents.shuffle(rng);
    for agent in &agents[..n_agents] {
        snap = snap
            .register_agent(agent_record(rng, agent, SERVERS))
            .unwrap();
    }
    snap
}

/// Every capability id the generators may emit.
pub fn capability_ids() -> BTreeSet<CapabilityId> {
    NAMESPACES
        .iter()
        .flat_map(|ns| {
            NAMES
                .iter()
                .map(move |n| CapabilityId::new(format!("{ns}.{n}")).unwrap())
        })
        .collect()
}

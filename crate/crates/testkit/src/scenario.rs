//! The restaurant booking scenario: one food server, one task, one agent.

use std::collections::BTreeSet;

use dalia_core::{
    AgentRecord, Capability, CapabilityId, DirectorySnapshot, ExecutionContext, FactToken, Goal,
    Intent, ServerId, SlotName, TaskDeclaration,
};

pub const FOOD_SERVER: &str = "mcp_food_server";
pub const MAP_SERVER: &str = "mcp_map_server";
pub const AGENT: &str = "RestaurantAgent";

fn slots(names: &[&str]) -> Vec<SlotName> {
    names.iter().map(|n| SlotName::new(*n).unwrap()).collect()
}

pub fn search() -> Capability {
    dalia_core::parse_capability(
        r#"{
          "capability_id": "restaurant.search",
          "role": "information_retrieval",
          "domain": "food",
          "inputs": ["location", "date", "party_size"],
          "outputs": ["restaurant_list"],
          "preconditions": ["location_known"],
          "postconditions": ["results_available"]
        }"#,
    )
    .unwrap()
}

pub fn reserve() -> Capability {
    Capability {
        capability_id: CapabilityId::new("restaurant.reserve").unwrap(),
        role: "transaction".into(),
        domain: "food".into(),
        inputs: slots(&["restaurant_list", "date", "party_size"]),
        outputs: slots(&["booking_confirmation"]),
        preconditions: vec![FactToken::new("results_available").unwrap()],
        postconditions: vec![FactToken::new("booking_made").unwrap()],
    }
}

pub fn booking() -> TaskDeclaration {
    dalia_core::parse_task(
        r#"{
          "task_id": "restaurant.booking",
          "intent": "book_restaurant",
          "inputs": ["location", "date", "party_size"],
          "outputs": ["booking_confirmation"],
          "capabilities": ["restaurant.search", "restaurant.reserve"]
        }"#,
    )
    .unwrap()
}

pub fn agent() -> AgentRecord {
    AgentRecord {
        agent_id: AGENT.into(),
        role: "task_executor".into(),
        domains: vec!["food".into()],
        accessible_servers: vec![
            ServerId::new(FOOD_SERVER).unwrap(),
            ServerId::new(MAP_SERVER).unwrap(),
        ],
    }
}

pub fn directory() -> DirectorySnapshot {
    DirectorySnapshot::new("scenario")
        .register_agent(agent())
        .unwrap()
        .bind_server_capabilities(
            &ServerId::new(FOOD_SERVER).unwrap(),
            vec![search().capability_id, reserve().capability_id],
        )
        .unwrap()
}

/// "Book a restaurant for four people tomorrow in the city centre."
pub fn goal() -> Goal {
    Goal::new(Intent::new("book_restaurant").unwrap())
        .bind(SlotName::new("location").unwrap(), "city centre")
        .bind(SlotName::new("date").unwrap(), "tomorrow")
        .bind(SlotName::new("party_size").unwrap(), "4")
}

pub fn declared() -> Vec<(ServerId, Vec<Capability>, Vec<TaskDeclaration>)> {
    vec![(
        ServerId::new(FOOD_SERVER).unwrap(),
        vec![search(), reserve()],
        vec![booking()],
    )]
}

pub fn context() -> ExecutionContext {
    let provided: BTreeSet<SlotName> = goal().bound_slots();
    ExecutionContext::seal(declared(), directory(), provided).unwrap()
}

//! Task declarations and feasibility analysis against a capability catalog.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::canonical::to_canonical_bytes;
use crate::capability::Capability;
use crate::document::{
    json_kind, parse_object, DocumentError, FieldReader, ValidationReport, Violation,
};
use crate::ident::{CapabilityId, Intent, SlotName, TaskId};

/// A goal exposed by a server, composed from declared capabilities.
///
/// `capabilities` is the exclusive pool the planner may draw from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TaskDeclaration {
    pub task_id: TaskId,
    pub intent: Intent,
    pub inputs: Vec<SlotName>,
    pub outputs: Vec<SlotName>,
    pub capabilities: Vec<CapabilityId>,
}

const FIELDS: &[&str] = &["task_id", "intent", "inputs", "outputs", "capabilities"];

pub fn parse_task(document: &str) -> Result<TaskDeclaration, DocumentError> {
    let obj = parse_object(document)?;
    task_from_object(&obj)
}

pub fn task_from_value(value: &Value) -> Result<TaskDeclaration, DocumentError> {
    match value {
        Value::Object(obj) => task_from_object(obj),
        other => Err(DocumentError::Malformed(format!(
            "expected a task object, found {}",
            json_kind(other)
        ))),
    }
}

fn task_from_object(obj: &Map<String, Value>) -> Result<TaskDeclaration, DocumentError> {
    let mut r = FieldReader::new(obj, FIELDS);
    let task_id = r.ident::<TaskId>("task_id");
    let intent = r.ident::<Intent>("intent");
    let inputs = r.ident_list::<SlotName>("inputs");
    let outputs = r.ident_list::<SlotName>("outputs");
    let capabilities = r.ident_list::<CapabilityId>("capabilities");
    let mut violations = r.violations;
    if matches!(&capabilities, Some(c) if c.is_empty()) {
        violations.push(Violation::invariant("capabilities", "empty capability set"));
    }
    if matches!(&outputs, Some(o) if o.is_empty()) {
        violations.push(Violation::invariant("outputs", "task declares no outputs"));
    }
    if !violations.is_empty() {
        return Err(DocumentError::Invalid(violations));
    }
    Ok(TaskDeclaration {
        task_id: task_id.unwrap(),
        intent: intent.unwrap(),
        inputs: inputs.unwrap(),
        outputs: outputs.unwrap(),
        capabilities: capabilities.unwrap(),
    })
}

pub fn validate_task(task: &TaskDeclaration) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut note = |field: &str, r: Result<(), crate::ident::IdentError>| {
        if let Err(e) = r {
            report.push(Violation::invariant(field, e.to_string()));
        }
    };
    note("task_id", task.task_id.check());
    note("intent", task.intent.check());
    for s in task.inputs.iter().chain(&task.outputs) {
        note("slots", s.check());
    }
    for c in &task.capabilities {
        note("capabilities", c.check());
    }
    let dups = [
        ("inputs", has_duplicate(&task.inputs).map(|d| d.to_string())),
        (
            "outputs",
            has_duplicate(&task.outputs).map(|d| d.to_string()),
        ),
        (
            "capabilities",
            has_duplicate(&task.capabilities).map(|d| d.to_string()),
        ),
    ];
    for (field, dup) in dups {
        if let Some(d) = dup {
            report.push(Violation::invariant(field, format!("duplicate entry {d}")));
        }
    }
    if task.capabilities.is_empty() {
        report.push(Violation::invariant("capabilities", "empty capability set"));
    }
    if task.outputs.is_empty() {
        report.push(Violation::invariant("outputs", "task declares no outputs"));
    }
    report
}

fn has_duplicate<T: Ord>(items: &[T]) -> Option<&T> {
    let mut seen = BTreeSet::new();
    items.iter().find(|i| !seen.insert(*i))
}

pub fn canonical_serialize_task(task: &TaskDeclaration) -> Vec<u8> {
    to_canonical_bytes(task)
}

impl<'de> Deserialize<'de> for TaskDeclaration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        task_from_value(&v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub missing_capabilities: Vec<CapabilityId>,
    pub uncovered_outputs: Vec<SlotName>,
    pub unreachable_inputs: Vec<SlotName>,
    pub diagnostics: Vec<String>,
}

/// Slots reachable from `provided` by repeatedly firing any capability whose
/// inputs are all reachable.
pub fn slot_closure<'a>(
    caps: impl IntoIterator<Item = &'a Capability> + Clone,
    provided: &BTreeSet<SlotName>,
) -> BTreeSet<SlotName> {
    let mut reachable = provided.clone();
    let mut fired: BTreeSet<&CapabilityId> = BTreeSet::new();
    loop {
        let mut progressed = false;
        for cap in caps.clone() {
            if fired.contains(&cap.capability_id) {
                continue;
            }
            if cap.inputs.iter().all(|s| reachable.contains(s)) {
                fired.insert(&cap.capability_id);
                reachable.extend(cap.outputs.iter().cloned());
                progressed = true;
            }
        }
        if !progressed {
            return reachable;
        }
    }
}

/// Decide whether `task` can be planned over `catalog` given the slots the
/// caller will bind. Pre/postcondition facts are not considered here.
pub fn check_feasibility<'a>(
    task: &TaskDeclaration,
    catalog: impl IntoIterator<Item = &'a Capability>,
    provided_inputs: &BTreeSet<SlotName>,
) -> FeasibilityReport {
    let by_id: BTreeMap<&CapabilityId, &Capability> =
        catalog.into_iter().map(|c| (&c.capability_id, c)).collect();

    let mut missing = Vec::new();
    let mut present: BTreeMap<&CapabilityId, &Capability> = BTreeMap::new();
    for id in &task.capabilities {
        match by_id.get(id) {
            Some(cap) => {
                present.insert(id, *cap);
            }
            None => missing.push(id.clone()),
        }
    }
    missing.sort();
    missing.dedup();

    let produced: BTreeSet<&SlotName> = present.values().flat_map(|c| c.outputs.iter()).collect();
    let mut uncovered: Vec<SlotName> = task
        .outputs
        .iter()
        .filter(|s| !produced.contains(s))
        .cloned()
        .collect();
    uncovered.sort();
    uncovered.dedup();

    let reachable = slot_closure(present.values().copied(), provided_inputs);
    let unreachable: Vec<SlotName> = present
        .values()
        .flat_map(|c| c.inputs.iter())
        .filter(|s| !reachable.contains(*s))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut diagnostics = Vec::new();
    for id in &missing {
        diagnostics.push(format!("capability {id} is not declared by any server"));
    }
    for slot in &uncovered {
        diagnostics.push(format!(
            "task output {slot} is produced by no available capability"
        ));
    }
    for slot in &unreachable {
        diagnostics.push(format!(
            "input slot {slot} can never be bound from the provided inputs"
        ));
    }
    for slot in task.inputs.iter().filter(|s| !provided_inputs.contains(*s)) {
        diagnostics.push(format!("declared task input {slot} is not provided"));
    }
    diagnostics.sort();

    FeasibilityReport {
        feasible: missing.is_empty() && uncovered.is_empty() && unreachable.is_empty(),
        missing_capabilities: missing,
        uncovered_outputs: uncovered,
        unreachable_inputs: unreachable,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capability::parse_capability;

    pub(crate) const LISTING: &str = r#"{
      "task_id": "restaurant.booking",
      "intent": "book_restaurant",
      "inputs": ["location", "date", "party_size"],
      "outputs": ["booking_confirmation"],
      "capabilities": [
        "restaurant.search",
        "restaurant.reserve"
      ]
    }"#;

    fn slots(names: &[&str]) -> BTreeSet<SlotName> {
        names.iter().map(|n| SlotName::new(*n).unwrap()).collect()
    }

    fn search() -> Capability {
        parse_capability(
            r#"{"capability_id":"restaurant.search","role":"information_retrieval","domain":"food",
            "inputs":["location","date","party_size"],"outputs":["restaurant_list"],
            "preconditions":["location_known"],"postconditions":["results_available"]}"#,
        )
        .unwrap()
    }

    fn reserve() -> Capability {
        parse_capability(
            r#"{"capability_id":"restaurant.reserve","role":"transaction","domain":"food",
            "inputs":["restaurant_list","date","party_size"],"outputs":["booking_confirmation"],
            "preconditions":[],"postconditions":[]}"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_booking_task() {
        let t = parse_task(LISTING).unwrap();
        assert_eq!(t.task_id.as_str(), "restaurant.booking");
        assert_eq!(t.intent.as_str(), "book_restaurant");
        assert_eq!(t.inputs.len(), 3);
        assert_eq!(t.outputs[0].as_str(), "booking_confirmation");
        assert_eq!(
            t.capabilities
                .iter()
                .map(|c| c.as_str())
                .collect::<Vec<_>>(),
            ["restaurant.search", "restaurant.reserve"]
        );
        assert!(validate_task(&t).is_ok());
    }

    #[test]
    fn empty_and_duplicate_pools_rejected() {
        let doc = LISTING.replace(
            r#"[
        "restaurant.search",
        "restaurant.reserve"
      ]"#,
            "[]",
        );
        let err = parse_task(&doc).unwrap_err();
        assert!(err.to_string().contains("empty capability set"));

        let doc = LISTING.replace("\"restaurant.reserve\"", "\"restaurant.search\"");
        let err = parse_task(&doc).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn scenario_is_feasible() {
        let t = parse_task(LISTING).unwrap();
        let catalog = [search(), reserve()];
        let r = check_feasibility(&t, &catalog, &slots(&["location", "date", "party_size"]));
        assert!(r.feasible, "{r:?}");
        assert!(r.missing_capabilities.is_empty());
        assert!(r.uncovered_outputs.is_empty());
        assert!(r.unreachable_inputs.is_empty());
    }

    #[test]
    fn missing_reserve_is_infeasible() {
        let t = parse_task(LISTING).unwrap();
        let catalog = [search()];
        let r = check_feasibility(&t, &catalog, &slots(&["location", "date", "party_size"]));
        assert!(!r.feasible);
        assert_eq!(r.missing_capabilities[0].as_str(), "restaurant.reserve");
        assert_eq!(
            r.uncovered_outputs,
            vec![SlotName::new("booking_confirmation").unwrap()]
        );
    }

    #[test]
    fn unprovided_input_is_unreachable() {
        let t = parse_task(LISTING).unwrap();
        let catalog = [search(), reserve()];
        let r = check_feasibility(&t, &catalog, &slots(&["location", "date"]));
        assert!(!r.feasible);
        // search cannot fire, so the list it would produce is unreachable too
        assert_eq!(
            r.unreachable_inputs,
            vec![
                SlotName::new("party_size").unwrap(),
                SlotName::new("restaurant_list").unwrap()
            ]
        );
    }

    #[test]
    fn canonical_task_bytes() {
        let t = parse_task(LISTING).unwrap();
        let bytes = canonical_serialize_task(&t);
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            r#"{"task_id":"restaurant.booking","intent":"book_restaurant","inputs":["location","date","party_size"],"outputs":["booking_confirmation"],"capabilities":["restaurant.search","restaurant.reserve"]}"#
        );
        assert_eq!(parse_task(std::str::from_utf8(&bytes).unwrap()).unwrap(), t);
        let mut other = t.clone();
        other.intent = Intent::new("reserve_table").unwrap();
        assert_ne!(canonical_serialize_task(&other), bytes);
    }
}

//! Capability declarations: parsing, validation and canonical form.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::canonical::to_canonical_bytes;
use crate::document::{parse_object, DocumentError, FieldReader, ValidationReport, Violation};
use crate::ident::{CapabilityId, FactToken, SlotName};

/// A declared executable operation.
///
/// Field order is the canonical serialization order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Capability {
    pub capability_id: CapabilityId,
    pub role: String,
    pub domain: String,
    pub inputs: Vec<SlotName>,
    pub outputs: Vec<SlotName>,
    pub preconditions: Vec<FactToken>,
    pub postconditions: Vec<FactToken>,
}

const FIELDS: &[&str] = &[
    "capability_id",
    "role",
    "domain",
    "inputs",
    "outputs",
    "preconditions",
    "postconditions",
];

impl Capability {
    pub fn produces(&self, slot: &SlotName) -> bool {
        self.outputs.contains(slot)
    }

    pub fn consumes(&self, slot: &SlotName) -> bool {
        self.inputs.contains(slot)
    }
}

/// Parse a capability document, reporting every violated rule.
pub fn parse_capability(document: &str) -> Result<Capability, DocumentError> {
    let obj = parse_object(document)?;
    capability_from_object(&obj)
}

pub fn capability_from_value(value: &Value) -> Result<Capability, DocumentError> {
    match value {
        Value::Object(obj) => capability_from_object(obj),
        other => Err(DocumentError::Malformed(format!(
            "expected a capability object, found {}",
            crate::document::json_kind(other)
        ))),
    }
}

fn capability_from_object(obj: &Map<String, Value>) -> Result<Capability, DocumentError> {
    let mut r = FieldReader::new(obj, FIELDS);
    let capability_id = r.ident::<CapabilityId>("capability_id");
    let role = r.string("role");
    let domain = r.string("domain");
    let inputs = r.ident_list::<SlotName>("inputs");
    let outputs = r.ident_list::<SlotName>("outputs");
    let preconditions = r.ident_list::<FactToken>("preconditions");
    let postconditions = r.ident_list::<FactToken>("postconditions");
    let mut violations = r.violations;

    if let Some(outputs) = &outputs {
        violations.extend(slot_invariants(inputs.as_deref().unwrap_or(&[]), outputs));
    }
    if !violations.is_empty() {
        return Err(DocumentError::Invalid(violations));
    }
    // All Options are Some when no violation was recorded.
    Ok(Capability {
        capability_id: capability_id.unwrap(),
        role: role.unwrap(),
        domain: domain.unwrap(),
        inputs: inputs.unwrap(),
        outputs: outputs.unwrap(),
        preconditions: preconditions.unwrap(),
        postconditions: postconditions.unwrap(),
    })
}

fn slot_invariants(inputs: &[SlotName], outputs: &[SlotName]) -> Vec<Violation> {
    let mut out = Vec::new();
    let ins: BTreeSet<_> = inputs.iter().collect();
    for slot in outputs.iter().filter(|s| ins.contains(s)) {
        out.push(Violation::invariant(
            "outputs",
            format!("slot {slot} appears in both inputs and outputs"),
        ));
    }
    if outputs.is_empty() {
        out.push(Violation::invariant(
            "outputs",
            "outputs empty: no observable effect",
        ));
    }
    out
}

fn duplicates<T: Ord + std::fmt::Display>(field: &str, items: &[T]) -> Vec<Violation> {
    let mut seen = BTreeSet::new();
    items
        .iter()
        .filter(|i| !seen.insert(*i))
        .map(|i| Violation::invariant(field, format!("duplicate entry {i}")))
        .collect()
}

/// Re-check every invariant on a value that may have been built in code.
pub fn validate_capability(cap: &Capability) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = cap.capability_id.check() {
        report.push(Violation::invariant("capability_id", e.to_string()));
    }
    for (field, slots) in [("inputs", &cap.inputs), ("outputs", &cap.outputs)] {
        for (i, s) in slots.iter().enumerate() {
            if let Err(e) = s.check() {
                report.push(Violation::invariant(format!("{field}[{i}]"), e.to_string()));
            }
        }
        report.violations.extend(duplicates(field, slots));
    }
    for (field, facts) in [
        ("preconditions", &cap.preconditions),
        ("postconditions", &cap.postconditions),
    ] {
        for (i, f) in facts.iter().enumerate() {
            if let Err(e) = f.check() {
                report.push(Violation::invariant(format!("{field}[{i}]"), e.to_string()));
            }
        }
        report.violations.extend(duplicates(field, facts));
    }
    report
        .violations
        .extend(slot_invariants(&cap.inputs, &cap.outputs));
    report
}

/// Single-line JSON with keys in declaration order.
pub fn canonical_serialize(cap: &Capability) -> Vec<u8> {
    to_canonical_bytes(cap)
}

impl<'de> Deserialize<'de> for Capability {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        capability_from_value(&v).map_err(serde::de::Error::custom)
    }
}

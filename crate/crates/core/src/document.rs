//! Declaration documents: error aggregation and field extraction.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::ident::IdentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Missing required field, unknown field, or a field of the wrong shape.
    Schema,
    /// Field present and well-shaped but breaking a declaration invariant.
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: ViolationKind::Schema,
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: ViolationKind::Invariant,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::Schema => "SchemaViolation",
            ViolationKind::Invariant => "InvariantViolation",
        };
        write!(f, "{kind} [{}]: {}", self.field, self.message)
    }
}

/// Outcome of a check that reports rather than fails.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.message.contains(needle) || v.field.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocumentError {
    #[error("MalformedDocument: {0}")]
    Malformed(String),
    #[error("{} violation(s): {}", .0.len(), render(.0))]
    Invalid(Vec<Violation>),
}

fn render(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl DocumentError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            DocumentError::Malformed(_) => &[],
            DocumentError::Invalid(v) => v,
        }
    }

    pub fn has_kind(&self, kind: ViolationKind) -> bool {
        self.violations().iter().any(|v| v.kind == kind)
    }
}

/// Parse text to a JSON object or fail as malformed.
pub(crate) fn parse_object(text: &str) -> Result<Map<String, Value>, DocumentError> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(other) => Err(DocumentError::Malformed(format!(
            "expected a JSON object, found {}",
            json_kind(&other)
        ))),
        Err(e) => Err(DocumentError::Malformed(e.to_string())),
    }
}

pub(crate) fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Walks a JSON object, recording every schema and invariant violation
/// instead of stopping at the first.
pub(crate) struct FieldReader<'a> {
    obj: &'a Map<String, Value>,
    pub violations: Vec<Violation>,
}

impl<'a> FieldReader<'a> {
    pub fn new(obj: &'a Map<String, Value>, allowed: &[&str]) -> Self {
        let mut violations = Vec::new();
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                violations.push(Violation::schema(key.clone(), "unknown field"));
            }
        }
        Self { obj, violations }
    }

    fn get(&mut self, field: &str) -> Option<&'a Value> {
        let v = self.obj.get(field);
        if v.is_none() {
            self.violations
                .push(Violation::schema(field, "missing required field"));
        }
        v
    }

    pub fn string(&mut self, field: &str) -> Option<String> {
        match self.get(field)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.violations.push(Violation::schema(
                    field,
                    format!("expected string, found {}", json_kind(other)),
                ));
                None
            }
        }
    }

    /// A string field parsed into an identifier type.
    pub fn ident<T: FromStr<Err = IdentError>>(&mut self, field: &str) -> Option<T> {
        let s = self.string(field)?;
        match s.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.violations
                    .push(Violation::invariant(field, e.to_string()));
                None
            }
        }
    }

    /// A list of identifiers; every bad element and every duplicate is reported.
    pub fn ident_list<T: Ord + Clone + fmt::Display + FromStr<Err = IdentError>>(
        &mut self,
        field: &str,
    ) -> Option<Vec<T>> {
        let items = match self.get(field)? {
            Value::Array(items) => items,
            other => {
                self.violations.push(Violation::schema(
                    field,
                    format!("expected array, found {}", json_kind(other)),
                ));
                return None;
            }
        };
        let mut out = Vec::with_capacity(items.len());
        let mut seen = BTreeSet::new();
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let Value::String(s) = item else {
                self.violations.push(Violation::schema(
                    format!("{field}[{i}]"),
                    format!("expected string, found {}", json_kind(item)),
                ));
                ok = false;
                continue;
            };
            match s.parse::<T>() {
                Ok(v) => {
                    if !seen.insert(v.clone()) {
                        self.violations
                            .push(Violation::invariant(field, format!("duplicate entry {v}")));
                        ok = false;
                    }
                    out.push(v);
                }
                Err(e) => {
                    self.violations
                        .push(Violation::invariant(format!("{field}[{i}]"), e.to_string()));
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }
}

//! Identifier newtypes shared by every declaration.
//!
//! All tokens follow the grammar `[a-z][a-z0-9_]*`. Capability and task ids
//! are two such tokens joined by a dot. Ordering is byte-wise on the rendered
//! string, which is what every deterministic tie-break in the planner uses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Why a string was rejected as an identifier.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentError {
    #[error("identifier is empty")]
    Empty,
    #[error("identifier not lowercase: {0:?}")]
    NotLowercase(String),
    #[error("identifier {0:?} does not match [a-z][a-z0-9_]*")]
    BadToken(String),
    #[error("qualified id {0:?} must be two dot-separated tokens")]
    BadQualified(String),
}

/// Check a single `[a-z][a-z0-9_]*` token.
pub fn check_token(s: &str) -> Result<(), IdentError> {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return Err(IdentError::Empty);
    };
    if s.chars().any(|c| c.is_uppercase()) {
        return Err(IdentError::NotLowercase(s.to_string()));
    }
    if !first.is_ascii_lowercase()
        || !chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    {
        return Err(IdentError::BadToken(s.to_string()));
    }
    Ok(())
}

fn check_qualified(s: &str) -> Result<(), IdentError> {
    if s.is_empty() {
        return Err(IdentError::Empty);
    }
    let mut parts = s.split('.');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(ns), Some(name), None) => {
            check_token(ns)?;
            check_token(name)
        }
        _ => {
            if s.chars().any(|c| c.is_uppercase()) {
                Err(IdentError::NotLowercase(s.to_string()))
            } else {
                Err(IdentError::BadQualified(s.to_string()))
            }
        }
    }
}

macro_rules! ident_type {
    ($(#[$meta:meta])* $name:ident, $check:path) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            /// Parse and validate.
            pub fn new(s: impl Into<String>) -> Result<Self, IdentError> {
                let s = s.into();
                $check(&s)?;
                Ok(Self(s))
            }

            /// Wrap without validation. Values built this way are re-checked
            /// by the `validate` functions of the owning declaration.
            pub fn unchecked(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn check(&self) -> Result<(), IdentError> {
                $check(&self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdentError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::new(s).map_err(serde::de::Error::custom)
            }
        }
    };
}

ident_type!(
    /// `namespace.name`, e.g. `restaurant.search`.
    CapabilityId,
    check_qualified
);
ident_type!(
    /// Same shape as a capability id, e.g. `restaurant.booking`.
    TaskId,
    check_qualified
);
ident_type!(
    /// A named input or output slot.
    SlotName,
    check_token
);
ident_type!(
    /// An opaque fact symbol used by pre/postconditions.
    FactToken,
    check_token
);
ident_type!(
    /// Identifier of a capability server, e.g. `mcp_food_server`.
    ServerId,
    check_token
);
ident_type!(
    /// Task intent, e.g. `book_restaurant`.
    Intent,
    check_token
);

impl CapabilityId {
    pub fn namespace(&self) -> &str {
        self.0.split('.').next().unwrap_or_default()
    }

    pub fn name(&self) -> &str {
        self.0.split('.').nth(1).unwrap_or_default()
    }
}

impl SlotName {
    /// The fact asserted when this slot becomes bound: `<slot>_known`.
    pub fn known_fact(&self) -> FactToken {
        FactToken(format!("{}_known", self.0))
    }
}

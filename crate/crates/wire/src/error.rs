//! Error objects and the code space.
//!
//! JSON-RPC reserves -32768..-32000; application errors live in
//! -32000..-32099.

use dalia_core::DirectoryError;
use serde::{Deserialize, Serialize};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;

pub const SERVER_ERROR: i64 = -32000;
pub const UNKNOWN_CAPABILITY: i64 = -32001;
pub const MISSING_INPUT: i64 = -32002;
pub const HANDLER_FAULT: i64 = -32003;

pub const INVALID_RECORD: i64 = -32010;
pub const INVALID_CAPABILITY_ID: i64 = -32011;
pub const UNKNOWN_AGENT: i64 = -32012;
pub const INVALID_SERVER_ID: i64 = -32013;
pub const INVALID_SNAPSHOT: i64 = -32014;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(deny_unknown_fields)]
#[error("{message} ({code})")]
pub struct ErrorObject {
    pub code: i64,
    pub message: String,
}

impl ErrorObject {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn invalid_params(message: impl Into<String>) -> Self {
        Self::new(INVALID_PARAMS, message)
    }
}

impl From<DirectoryError> for ErrorObject {
    fn from(e: DirectoryError) -> Self {
        let code = match e {
            DirectoryError::InvalidRecord(_) => INVALID_RECORD,
            DirectoryError::InvalidCapabilityId(_) => INVALID_CAPABILITY_ID,
            DirectoryError::UnknownAgent(_) => UNKNOWN_AGENT,
            DirectoryError::InvalidServerId(_) => INVALID_SERVER_ID,
            DirectoryError::Malformed(_) => INVALID_SNAPSHOT,
        };
        Self::new(code, e.to_string())
    }
}

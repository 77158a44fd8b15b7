//! Declarative grounding for agentic workflows.
//!
//! Servers declare [`Capability`]s and [`TaskDeclaration`]s, a
//! [`DirectorySnapshot`] says which agents may reach which servers, and the
//! orchestrator runs three strictly separated phases:
//!
//! 1. [`discover`] queries every endpoint once and seals an [`ExecutionContext`].
//! 2. [`plan`] turns a [`Goal`] into a [`TaskGraph`] using only what the
//!    context declares.
//! 3. [`execute`] runs the graph in canonical order and returns an
//!    [`ExecutionTrace`].
//!
//! Every step is deterministic: identical inputs give byte-identical graphs
//! and field-identical traces.

#![forbid(unsafe_code)]

pub mod atdp;
pub mod canonical;
pub mod capability;
pub mod directory;
pub mod discovery;
pub mod document;
pub mod executor;
pub mod graph;
pub mod ident;
pub mod planner;

pub use atdp::{check_feasibility, parse_task, FeasibilityReport, TaskDeclaration};
pub use capability::{canonical_serialize, parse_capability, validate_capability, Capability};
pub use directory::{load_snapshot, save_snapshot, AgentRecord, DirectoryError, DirectorySnapshot};
pub use discovery::{
    discover, CapabilityEndpoint, DirectoryEndpoint, DiscoveryError, EndpointError,
    ExecutionContext,
};
pub use document::{DocumentError, ValidationReport, Violation, ViolationKind};
pub use executor::{
    execute, replay_check, ExecutionTrace, InvokeError, Invoker, Outcome, StepStatus,
};
pub use graph::{canonical_order, Edge, Node, NodeId, TaskGraph};
pub use ident::{CapabilityId, FactToken, IdentError, Intent, ServerId, SlotName, TaskId};
pub use planner::{
    assign_agents, plan, resolve_goal, synthesize_graph, validate_graph, Goal, PlanError,
};

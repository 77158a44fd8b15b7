//! Test support for dalia: the restaurant scenario as plain values,
//! seeded random instance generators, brute-force oracles and an
//! in-process invoker with fault injection.
//!
//! Oracles here deliberately share no code with the planner: they enumerate
//! rather than search, so agreement between the two is evidence.

pub mod gen;
pub mod mock;
pub mod oracle;
pub mod scenario;

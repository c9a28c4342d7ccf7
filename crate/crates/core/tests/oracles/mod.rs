//! Oracles shared by the integration tests and the acceptance harness. They
//! work through the domain layer only and never call the planner or engine
//! code they check.
#![allow(dead_code)]

pub mod bfs;
pub mod trace;

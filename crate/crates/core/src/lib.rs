//! Adaptive process orchestration over an expected and a physical reality.
//!
//! A [`scenario`] file declares a domain theory, a structured process and
//! simulated participants. The [`engine`] executes the process, the monitor
//! compares both realities, and on divergence the [`adaptation`] loop asks
//! the embedded [`planner`] for a recovery plan that is spliced in front of
//! the remaining process. Every state change goes through the event [`log`],
//! which replays deterministically.

pub mod adaptation;
pub mod domain;
pub mod engine;
pub mod fixtures;
pub mod gateway;
pub mod log;
pub mod planner;
pub mod process;
pub mod runner;
pub mod scenario;
pub mod service;

pub use adaptation::{build_recovery, drive, RecoveryOutcome};
pub use domain::{DomainTheory, GroundAssignment, GroundFluent, Reality, Value};
pub use engine::{Engine, EngineError, EngineState, Event, EventRecord, ItemStatus, Mode, WorkItem};
pub use log::{replay, FileSink, LogError, LogSink, NullSink};
pub use process::{normalize, Process, TaskCall};
pub use runner::{run_auto, EventScript, RunStatus};
pub use scenario::{parse_scenario, MonitorMode, ScenarioDefinition, ScenarioError};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{GroundAssignment, GroundFluent};
use crate::gateway::OutcomeLabel;
use crate::process::{Process, TaskCall};
use crate::scenario::MonitorMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AdaptFailReason {
    Unsolvable,
    ResourceLimit,
    AdaptationLoop,
    Rejected,
    RealignmentViolation,
}

impl fmt::Display for AdaptFailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdaptFailReason::Unsolvable => "UNSOLVABLE",
            AdaptFailReason::ResourceLimit => "RESOURCE_LIMIT",
            AdaptFailReason::AdaptationLoop => "ADAPTATION_LOOP",
            AdaptFailReason::Rejected => "REJECTED",
            AdaptFailReason::RealignmentViolation => "REALIGNMENT_VIOLATION",
        })
    }
}

/// Everything that changes engine state. Each event carries the choices
/// made outside the engine (service matched, observed outcome, plan) so
/// that replay needs nothing else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Event {
    Genesis {
        /// SHA-256 of the canonical scenario serialization.
        scenario: String,
        seed: u64,
        monitor: MonitorMode,
    },
    Assign {
        item: u64,
        call: TaskCall,
        service: String,
    },
    Start {
        item: u64,
    },
    Finish {
        item: u64,
        outcome: OutcomeLabel,
        observed: Vec<GroundAssignment>,
    },
    Exogenous {
        event: String,
        args: Vec<String>,
    },
    AdaptBegin {
        mismatch: Vec<GroundFluent>,
    },
    AdaptSplice {
        plan: Vec<TaskCall>,
    },
    AdaptFail {
        reason: AdaptFailReason,
        detail: String,
    },
    Complete,
    ReplaceRemainder {
        process: Process,
    },
    ForceAlign,
    Abort,
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Genesis { .. } => "GENESIS",
            Event::Assign { .. } => "ASSIGN",
            Event::Start { .. } => "START",
            Event::Finish { .. } => "FINISH",
            Event::Exogenous { .. } => "EXOGENOUS",
            Event::AdaptBegin { .. } => "ADAPT_BEGIN",
            Event::AdaptSplice { .. } => "ADAPT_SPLICE",
            Event::AdaptFail { .. } => "ADAPT_FAIL",
            Event::Complete => "COMPLETE",
            Event::ReplaceRemainder { .. } => "REPLACE_REMAINDER",
            Event::ForceAlign => "FORCE_ALIGN",
            Event::Abort => "ABORT",
        }
    }
}

/// One log line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub sequence: u64,
    #[serde(flatten)]
    pub event: Event,
    /// Digest of the engine state after applying this record.
    pub state_hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_self_describing() {
        let r = EventRecord {
            sequence: 3,
            event: Event::Start { item: 1 },
            state_hash: "ab".into(),
        };
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(line, r#"{"sequence":3,"kind":"START","payload":{"item":1},"state_hash":"ab"}"#);
        assert_eq!(serde_json::from_str::<EventRecord>(&line).unwrap(), r);

        let c = EventRecord {
            sequence: 9,
            event: Event::Complete,
            state_hash: "cd".into(),
        };
        let line = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<EventRecord>(&line).unwrap(), c);
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::{AdaptFailReason, Event};
use super::node::{remainder_process, settle, Node};
use crate::domain::{
    apply_effects, apply_ground, evaluate_formula, DomainError, DomainTheory, GroundFluent, Reality, Violation,
};
use crate::gateway::GatewayError;
use crate::process::{normalize, validate_process, Process, TaskCall};
use crate::scenario::{MonitorMode, ScenarioDefinition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Running,
    Adapting,
    Manual,
    Completed,
    Aborted,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Running => "RUNNING",
            Mode::Adapting => "ADAPTING",
            Mode::Manual => "MANUAL",
            Mode::Completed => "COMPLETED",
            Mode::Aborted => "ABORTED",
        })
    }
}

/// Lifecycle states in their only permitted order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ItemStatus {
    Assigned,
    Started,
    Finished,
    Released,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkItem {
    pub id: u64,
    pub call: TaskCall,
    pub service: String,
    pub status: ItemStatus,
}

impl WorkItem {
    pub fn is_open(&self) -> bool {
        self.status < ItemStatus::Released
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptationState {
    /// Between ADAPT_BEGIN and its terminal record.
    pub planning: bool,
    /// Adaptations begun since the last operator intervention.
    pub count: u32,
    pub last_failure: Option<AdaptFailReason>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("MODE_ERROR: {command} is not accepted in mode {mode}")]
    ModeError { mode: Mode, command: &'static str },
    #[error("BAD_LIFECYCLE: work item {item} is {status:?}")]
    BadLifecycle { item: u64, status: ItemStatus },
    #[error("UNKNOWN_WORK_ITEM: {0}")]
    UnknownWorkItem(u64),
    #[error("NOT_ENABLED: {0} is not enabled")]
    NotEnabled(TaskCall),
    #[error("NO_CAPABLE_SERVICE: {0}")]
    NoCapableService(String),
    #[error("UNKNOWN_TASK: {0}")]
    UnknownTask(String),
    #[error("UNKNOWN_EVENT: {0}")]
    UnknownEvent(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error("NOT_QUIESCENT: {0} work items are still open")]
    NotQuiescent(usize),
    #[error("STALE_PLAN: {0}")]
    StalePlan(String),
    #[error("NO_PENDING_PLAN")]
    NoPendingPlan,
    #[error("INVALID_PROCESS: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidProcess(Vec<Violation>),
    #[error("INVALID_RECORD: {0}")]
    InvalidRecord(String),
    #[error("STORAGE_FAILURE: {0}")]
    StorageFailure(String),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::ModeError { .. } => "MODE_ERROR",
            EngineError::BadLifecycle { .. } => "BAD_LIFECYCLE",
            EngineError::UnknownWorkItem(_) => "UNKNOWN_WORK_ITEM",
            EngineError::NotEnabled(_) => "NOT_ENABLED",
            EngineError::NoCapableService(_) => "NO_CAPABLE_SERVICE",
            EngineError::UnknownTask(_) => "UNKNOWN_TASK",
            EngineError::UnknownEvent(_) => "UNKNOWN_EVENT",
            EngineError::Domain(e) => e.code(),
            EngineError::Gateway(e) => e.code(),
            EngineError::NotQuiescent(_) => "NOT_QUIESCENT",
            EngineError::StalePlan(_) => "STALE_PLAN",
            EngineError::NoPendingPlan => "NO_PENDING_PLAN",
            EngineError::InvalidProcess(_) => "INVALID_PROCESS",
            EngineError::InvalidRecord(_) => "INVALID_RECORD",
            EngineError::StorageFailure(_) => "STORAGE_FAILURE",
        }
    }
}

impl From<GatewayError> for EngineError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::NoCapableService(caps) => {
                EngineError::NoCapableService(format!("no free service provides {caps:?}"))
            }
            GatewayError::Domain(d) => EngineError::Domain(d),
            other => EngineError::Gateway(other),
        }
    }
}

/// Everything the state hash covers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub exp: Reality,
    pub phy: Reality,
    pub remainder: Option<Node>,
    pub items: Vec<WorkItem>,
    pub mode: Mode,
    /// Number of records applied.
    pub clock: u64,
    pub next_item: u64,
    pub adaptation: AdaptationState,
    /// An exogenous event arrived while items were started; the monitor
    /// runs when they finish.
    pub monitor_pending: bool,
}

impl EngineState {
    /// The state described by a genesis record.
    pub fn new(def: &ScenarioDefinition) -> Result<Self, EngineError> {
        let theory = &def.theory;
        let initial = theory.initial_reality().map_err(|missing| {
            EngineError::Domain(DomainError::MissingInstance(missing.into_iter().next().expect("non-empty")))
        })?;
        let remainder = settle(&normalize(&def.process), &initial, theory)?;
        Ok(EngineState {
            exp: initial.clone(),
            phy: initial,
            remainder,
            items: Vec::new(),
            mode: Mode::Running,
            clock: 0,
            next_item: 0,
            adaptation: AdaptationState::default(),
            monitor_pending: false,
        })
    }

    pub fn remainder_process(&self) -> Process {
        remainder_process(&self.remainder)
    }

    pub fn item(&self, id: u64) -> Option<&WorkItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn open_items(&self) -> impl Iterator<Item = &WorkItem> {
        self.items.iter().filter(|i| i.is_open())
    }

    pub fn busy_services(&self) -> std::collections::BTreeSet<String> {
        self.open_items().map(|i| i.service.clone()).collect()
    }

    pub fn has_started(&self) -> bool {
        self.items.iter().any(|i| i.status == ItemStatus::Started)
    }

    /// No open work items.
    pub fn quiescent(&self) -> bool {
        self.open_items().next().is_none()
    }

    /// EXP/PHY differences restricted to relevant fluents.
    pub fn mismatch(&self, theory: &DomainTheory) -> Vec<GroundFluent> {
        self.exp
            .diff(&self.phy)
            .into_iter()
            .filter(|g| theory.is_relevant(&g.fluent))
            .collect()
    }

    /// Unclaimed frontier calls whose precondition holds in EXP, without
    /// duplicates, in frontier order.
    pub fn enabled_tasks(&self, theory: &DomainTheory) -> Result<Vec<TaskCall>, EngineError> {
        let mut out: Vec<TaskCall> = Vec::new();
        if self.mode != Mode::Running {
            return Ok(out);
        }
        let Some(node) = &self.remainder else { return Ok(out) };
        for (call, item) in node.frontier() {
            if item.is_none() && !out.contains(call) && precondition(theory, call, &self.exp)? {
                out.push(call.clone());
            }
        }
        Ok(out)
    }

    fn blocked_in_phy(&self, theory: &DomainTheory) -> Result<bool, EngineError> {
        let Some(node) = &self.remainder else { return Ok(false) };
        for (call, item) in node.frontier() {
            if item.is_none() && !precondition(theory, call, &self.phy)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// True when a COMPLETE record is due.
    pub fn completion_due(&self, theory: &DomainTheory) -> bool {
        self.mode == Mode::Running
            && self.remainder.is_none()
            && self.quiescent()
            && self.mismatch(theory).is_empty()
    }

    /// Decides whether the current mismatch calls for adaptation.
    fn monitor(&mut self, def: &ScenarioDefinition) -> Result<(), EngineError> {
        if self.mode != Mode::Running {
            return Ok(());
        }
        if self.mismatch(&def.theory).is_empty() {
            return Ok(());
        }
        let adapt = match def.monitor {
            MonitorMode::Eager => true,
            MonitorMode::Lazy => self.remainder.is_none() || self.blocked_in_phy(&def.theory)?,
        };
        if adapt {
            self.mode = Mode::Adapting;
        }
        Ok(())
    }

    pub(crate) fn require_running(&self, command: &'static str) -> Result<(), EngineError> {
        self.require_mode(&[Mode::Running], command)
    }

    fn require_mode(&self, allowed: &[Mode], command: &'static str) -> Result<(), EngineError> {
        if allowed.contains(&self.mode) {
            Ok(())
        } else {
            Err(EngineError::ModeError { mode: self.mode, command })
        }
    }

    fn require_quiescent(&self) -> Result<(), EngineError> {
        match self.open_items().count() {
            0 => Ok(()),
            n => Err(EngineError::NotQuiescent(n)),
        }
    }

    fn item_mut(&mut self, id: u64, expected: ItemStatus) -> Result<&mut WorkItem, EngineError> {
        let item = self
            .items
            .iter_mut()
            .find(|i| i.id == id)
            .ok_or(EngineError::UnknownWorkItem(id))?;
        if item.status != expected {
            return Err(EngineError::BadLifecycle { item: id, status: item.status });
        }
        Ok(item)
    }

    /// The evolve function: applies one record. On error the state may be
    /// partially updated, so callers apply to a copy.
    pub fn apply(&mut self, event: &Event, def: &ScenarioDefinition) -> Result<(), EngineError> {
        let theory = &def.theory;
        match event {
            Event::Genesis { .. } => {
                if self.clock != 0 {
                    return Err(EngineError::InvalidRecord("genesis must be the first record".into()));
                }
            }
            Event::Assign { item, call, service } => {
                self.require_mode(&[Mode::Running], "assign")?;
                if *item != self.next_item {
                    return Err(EngineError::InvalidRecord(format!(
                        "expected work item id {}, got {item}",
                        self.next_item
                    )));
                }
                if !self.enabled_tasks(theory)?.contains(call) {
                    return Err(EngineError::NotEnabled(call.clone()));
                }
                let task = theory.task(&call.task).ok_or_else(|| EngineError::UnknownTask(call.task.clone()))?;
                let capable = theory
                    .service(service)
                    .is_some_and(|s| task.requires.is_subset(&s.provides));
                if !capable || self.busy_services().contains(service) {
                    return Err(EngineError::NoCapableService(format!("{service} cannot take {call}")));
                }
                let claimed = self.remainder.as_mut().is_some_and(|n| n.claim(call, *item));
                debug_assert!(claimed, "enabled calls are unclaimed frontier tasks");
                self.items.push(WorkItem {
                    id: *item,
                    call: call.clone(),
                    service: service.clone(),
                    status: ItemStatus::Assigned,
                });
                self.next_item += 1;
            }
            Event::Start { item } => {
                self.require_mode(&[Mode::Running, Mode::Adapting], "start")?;
                self.item_mut(*item, ItemStatus::Assigned)?.status = ItemStatus::Started;
            }
            Event::Finish { item, observed, .. } => {
                self.require_mode(&[Mode::Running, Mode::Adapting], "finish")?;
                let call = self.item_mut(*item, ItemStatus::Started)?.call.clone();
                let task = theory.task(&call.task).ok_or_else(|| EngineError::UnknownTask(call.task.clone()))?;
                let binding = theory.bind(&task.params, &call.args)?;
                let exp = apply_effects(&self.exp, &task.effects, &binding, theory)?;
                let phy = apply_ground(&self.phy, observed, theory)?;
                self.exp = exp;
                self.phy = phy;
                self.item_mut(*item, ItemStatus::Started)?.status = ItemStatus::Released;
                if let Some(node) = self.remainder.take() {
                    self.remainder = node.complete(*item, &self.exp, theory)?;
                }
                self.monitor_pending = false;
                self.monitor(def)?;
            }
            Event::Exogenous { event, args } => {
                self.require_mode(&[Mode::Running, Mode::Adapting], "inject-event")?;
                let spec = theory.event(event).ok_or_else(|| EngineError::UnknownEvent(event.clone()))?;
                let binding = theory.bind(&spec.params, args)?;
                self.phy = apply_effects(&self.phy, &spec.effects, &binding, theory)?;
                if self.has_started() {
                    self.monitor_pending = true;
                } else {
                    self.monitor(def)?;
                }
            }
            Event::AdaptBegin { mismatch } => {
                self.require_mode(&[Mode::Adapting], "adapt-begin")?;
                self.require_quiescent()?;
                if self.adaptation.planning {
                    return Err(EngineError::InvalidRecord("adaptation already in progress".into()));
                }
                if *mismatch != self.mismatch(theory) {
                    return Err(EngineError::InvalidRecord("mismatch does not match the realities".into()));
                }
                self.adaptation.planning = true;
                self.adaptation.count += 1;
            }
            Event::AdaptSplice { plan } => {
                self.require_mode(&[Mode::Adapting], "splice")?;
                self.require_quiescent()?;
                if !self.adaptation.planning {
                    return Err(EngineError::InvalidRecord("splice without ADAPT_BEGIN".into()));
                }
                let plan_process = Process::from_calls(plan.iter().cloned());
                let violations = validate_process(&plan_process, theory);
                if !violations.is_empty() {
                    return Err(EngineError::InvalidProcess(violations));
                }
                let spliced = normalize(&Process::Seq(vec![plan_process, self.remainder_process()]));
                self.exp = self.phy.clone();
                self.remainder = settle(&spliced, &self.exp, theory)?;
                self.mode = Mode::Running;
                self.adaptation.planning = false;
                self.monitor(def)?;
            }
            Event::AdaptFail { reason, .. } => {
                self.require_mode(&[Mode::Adapting], "adapt-fail")?;
                self.adaptation.planning = false;
                self.adaptation.last_failure = Some(*reason);
                self.mode = Mode::Manual;
            }
            Event::Complete => {
                if !self.completion_due(theory) {
                    return Err(EngineError::InvalidRecord("process is not complete".into()));
                }
                self.mode = Mode::Completed;
            }
            Event::ReplaceRemainder { process } => {
                self.require_mode(&[Mode::Manual], "replace-remainder")?;
                self.require_quiescent()?;
                let violations = validate_process(process, theory);
                if !violations.is_empty() {
                    return Err(EngineError::InvalidProcess(violations));
                }
                self.remainder = settle(&normalize(process), &self.exp, theory)?;
                self.resume();
                self.monitor(def)?;
            }
            Event::ForceAlign => {
                self.require_mode(&[Mode::Manual], "force-align")?;
                self.exp = self.phy.clone();
                self.resume();
                self.monitor(def)?;
            }
            Event::Abort => {
                self.require_mode(&[Mode::Running, Mode::Adapting, Mode::Manual], "abort")?;
                self.mode = Mode::Aborted;
                self.adaptation.planning = false;
            }
        }
        self.clock += 1;
        Ok(())
    }

    fn resume(&mut self) {
        self.mode = Mode::Running;
        self.adaptation = AdaptationState::default();
    }
}

pub(crate) fn precondition(theory: &DomainTheory, call: &TaskCall, r: &Reality) -> Result<bool, EngineError> {
    let task = theory.task(&call.task).ok_or_else(|| EngineError::UnknownTask(call.task.clone()))?;
    let binding = theory.bind(&task.params, &call.args)?;
    Ok(evaluate_formula(&task.precondition, r, &binding, theory)?)
}

//! Small-step interpreter over the dual realities. Every state change is an
//! [`Event`] committed to the log; [`EngineState::apply`] is the only place
//! that changes state, so live runs and replay share one code path.

mod event;
mod node;
mod state;

use std::sync::Arc;

pub use event::{AdaptFailReason, Event, EventRecord};
pub use node::{remainder_process, settle, Node};
pub use state::{AdaptationState, EngineError, EngineState, ItemStatus, Mode, WorkItem};

use crate::adaptation::{plan_fits, realignment_violations, RecoveryOutcome};
use crate::domain::{GroundFluent, Reality};
use crate::gateway::{match_service, resolve_observed, simulate_outcome, ObservedAssignment, OutcomeLabel};
use crate::log::{scenario_digest, state_hash, LogSink, NullSink};
use crate::process::{Process, TaskCall};
use crate::scenario::ScenarioDefinition;

/// A synthesized plan waiting for operator approval.
#[derive(Clone, Debug, PartialEq)]
pub struct PendingPlan {
    pub plan: Vec<TaskCall>,
    /// PHY the plan was computed from.
    pub phy: Reality,
}

pub struct Engine {
    def: Arc<ScenarioDefinition>,
    state: EngineState,
    log: Vec<EventRecord>,
    sink: Box<dyn LogSink + Send>,
    halted: Option<String>,
    pending: Option<PendingPlan>,
    splices: u64,
    realignment_violations: u64,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("mode", &self.state.mode)
            .field("clock", &self.state.clock)
            .field("halted", &self.halted)
            .finish_non_exhaustive()
    }
}

impl Engine {
    /// A pre-genesis engine, used by replay.
    pub(crate) fn blank(def: ScenarioDefinition, sink: Box<dyn LogSink + Send>) -> Result<Self, EngineError> {
        let state = EngineState::new(&def)?;
        Ok(Engine {
            def: Arc::new(def),
            state,
            log: Vec::new(),
            sink,
            halted: None,
            pending: None,
            splices: 0,
            realignment_violations: 0,
        })
    }

    /// Initializes a run and commits its genesis record.
    pub fn start(def: ScenarioDefinition, sink: Box<dyn LogSink + Send>) -> Result<Self, EngineError> {
        let genesis = Event::Genesis {
            scenario: scenario_digest(&def),
            seed: def.seed,
            monitor: def.monitor,
        };
        let mut engine = Engine::blank(def, sink)?;
        engine.command(genesis)?;
        engine.complete_if_due()?;
        Ok(engine)
    }

    /// A run that is not persisted anywhere.
    pub fn in_memory(def: ScenarioDefinition) -> Result<Self, EngineError> {
        Engine::start(def, Box::new(NullSink))
    }

    pub fn def(&self) -> &ScenarioDefinition {
        &self.def
    }

    pub fn shared_def(&self) -> Arc<ScenarioDefinition> {
        self.def.clone()
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn last_hash(&self) -> Option<&str> {
        self.log.last().map(|r| r.state_hash.as_str())
    }

    pub fn halted(&self) -> Option<&str> {
        self.halted.as_deref()
    }

    pub fn pending_plan(&self) -> Option<&PendingPlan> {
        self.pending.as_ref()
    }

    /// Number of ADAPT_SPLICE records committed by this engine instance.
    pub fn splices(&self) -> u64 {
        self.splices
    }

    /// Splices whose plan failed the realignment check (should stay 0).
    pub fn realignment_violations(&self) -> u64 {
        self.realignment_violations
    }

    pub fn mismatch(&self) -> Vec<GroundFluent> {
        self.state.mismatch(&self.def.theory)
    }

    pub fn enabled_tasks(&self) -> Result<Vec<TaskCall>, EngineError> {
        self.state.enabled_tasks(&self.def.theory)
    }

    pub fn remainder(&self) -> Process {
        self.state.remainder_process()
    }

    /// Applies `event` to a copy of the state, persists the record and only
    /// then publishes the new state.
    fn commit(&mut self, event: Event) -> Result<u64, EngineError> {
        if let Some(reason) = &self.halted {
            return Err(EngineError::StorageFailure(reason.clone()));
        }
        let mut next = self.state.clone();
        next.apply(&event, &self.def)?;
        let record = EventRecord {
            sequence: self.log.len() as u64,
            event,
            state_hash: state_hash(&next),
        };
        if let Err(e) = self.sink.append(&record) {
            let reason = e.to_string();
            self.halted = Some(reason.clone());
            self.state.mode = Mode::Manual;
            return Err(EngineError::StorageFailure(reason));
        }
        let seq = record.sequence;
        self.state = next;
        self.log.push(record);
        Ok(seq)
    }

    fn command(&mut self, event: Event) -> Result<u64, EngineError> {
        self.commit(event)
    }

    /// Commits COMPLETE when the remainder is done, nothing is open and the
    /// realities agree. Drivers call this once they have delivered every
    /// input that was due, so an event that immediately follows the last
    /// task is still observed.
    pub fn complete_if_due(&mut self) -> Result<Option<u64>, EngineError> {
        if self.halted.is_none() && self.state.completion_due(&self.def.theory) {
            return self.commit(Event::Complete).map(Some);
        }
        Ok(None)
    }

    /// Re-applies a logged record and returns the resulting hash.
    pub(crate) fn replay_record(&mut self, record: &EventRecord) -> Result<String, EngineError> {
        let mut next = self.state.clone();
        next.apply(&record.event, &self.def)?;
        let hash = state_hash(&next);
        match &record.event {
            Event::AdaptSplice { .. } => {
                self.splices += 1;
                self.pending = None;
            }
            Event::AdaptFail { .. } => self.pending = None,
            _ => {}
        }
        self.state = next;
        self.log.push(record.clone());
        Ok(hash)
    }

    /// Assigns `call` to the first free capable service.
    pub fn assign(&mut self, call: &TaskCall) -> Result<u64, EngineError> {
        self.state.require_running("assign")?;
        let task = self
            .def
            .theory
            .task(&call.task)
            .ok_or_else(|| EngineError::UnknownTask(call.task.clone()))?;
        if !self.enabled_tasks()?.contains(call) {
            return Err(EngineError::NotEnabled(call.clone()));
        }
        let service = match_service(task, &self.def.theory.services, &self.state.busy_services())?;
        let event = Event::Assign {
            item: self.state.next_item,
            call: call.clone(),
            service: service.id.clone(),
        };
        self.command(event)
    }

    pub fn start_item(&mut self, item: u64) -> Result<u64, EngineError> {
        self.command(Event::Start { item })
    }

    /// Finishes a started item with an explicit outcome; raw readings are
    /// discretized through the scenario's rules.
    pub fn finish(
        &mut self,
        item: u64,
        outcome: OutcomeLabel,
        observed: &[ObservedAssignment],
    ) -> Result<u64, EngineError> {
        let observed = resolve_observed(observed, &self.def.rules)?;
        self.command(Event::Finish { item, outcome, observed })
    }

    /// Finishes a started item with the outcome its participant script
    /// prescribes (faithful when unscripted).
    pub fn finish_simulated(&mut self, item: u64) -> Result<u64, EngineError> {
        let work = self.state.item(item).ok_or(EngineError::UnknownWorkItem(item))?.clone();
        if work.status != ItemStatus::Started {
            return Err(EngineError::BadLifecycle { item, status: work.status });
        }
        let outcome = simulate_outcome(&work, &self.def.scripts, &self.def.theory, &self.state.items)?;
        self.finish(item, outcome.label, &outcome.observed)
    }

    /// Finishes with exactly the expected effects.
    pub fn finish_faithful(&mut self, item: u64) -> Result<u64, EngineError> {
        let work = self.state.item(item).ok_or(EngineError::UnknownWorkItem(item))?.clone();
        let outcome = simulate_outcome(&work, &[], &self.def.theory, &self.state.items)?;
        self.finish(item, outcome.label, &outcome.observed)
    }

    pub fn inject(&mut self, event: &str, args: &[String]) -> Result<u64, EngineError> {
        self.command(Event::Exogenous {
            event: event.to_string(),
            args: args.to_vec(),
        })
    }

    /// True when the monitor asked for adaptation and planning may begin.
    pub fn needs_adaptation(&self) -> bool {
        self.halted.is_none()
            && self.state.mode == Mode::Adapting
            && !self.state.adaptation.planning
            && self.state.quiescent()
    }

    /// True between ADAPT_BEGIN and a result, unless a plan awaits approval.
    pub fn awaiting_plan(&self) -> bool {
        self.halted.is_none()
            && self.state.mode == Mode::Adapting
            && self.state.adaptation.planning
            && self.pending.is_none()
    }

    /// Commits ADAPT_BEGIN. Past the adaptation limit the attempt fails at
    /// once with ADAPTATION_LOOP.
    pub fn begin_adaptation(&mut self) -> Result<u64, EngineError> {
        let seq = self.commit(Event::AdaptBegin {
            mismatch: self.mismatch(),
        })?;
        if self.state.adaptation.count > self.def.adaptation_limit {
            self.commit(Event::AdaptFail {
                reason: AdaptFailReason::AdaptationLoop,
                detail: format!("more than {} adaptations without progress", self.def.adaptation_limit),
            })?;
        }
        Ok(seq)
    }

    /// Submits the result of planning on a snapshot whose PHY was `based_on`.
    /// A plan is re-checked against the current realities; if PHY moved in
    /// the meantime and the plan no longer fits, `STALE_PLAN` is returned
    /// and nothing is recorded, so the caller can plan again.
    pub fn submit_recovery(&mut self, outcome: RecoveryOutcome, based_on: &Reality) -> Result<u64, EngineError> {
        if !self.awaiting_plan() {
            return Err(EngineError::ModeError {
                mode: self.state.mode,
                command: "submit-recovery",
            });
        }
        match outcome {
            RecoveryOutcome::Spliced { plan } => {
                if self.state.phy != *based_on && !self.plan_fits(&plan) {
                    return Err(EngineError::StalePlan("PHY changed while planning".into()));
                }
                if self.def.approval && !plan.is_empty() {
                    self.pending = Some(PendingPlan {
                        plan,
                        phy: self.state.phy.clone(),
                    });
                    return Ok(self.log.len() as u64 - 1);
                }
                self.splice(plan)
            }
            RecoveryOutcome::Unsolvable { detail } => self.command(Event::AdaptFail {
                reason: AdaptFailReason::Unsolvable,
                detail,
            }),
            RecoveryOutcome::ResourceExhausted { detail } => self.command(Event::AdaptFail {
                reason: AdaptFailReason::ResourceLimit,
                detail,
            }),
        }
    }

    fn plan_fits(&self, plan: &[TaskCall]) -> bool {
        plan_fits(&self.def.theory, &self.state.phy, &self.state.exp, plan)
    }

    /// Splices after the realignment check; a plan that would not bring PHY
    /// back to EXP is refused with REALIGNMENT_VIOLATION instead.
    fn splice(&mut self, plan: Vec<TaskCall>) -> Result<u64, EngineError> {
        let violations = realignment_violations(&self.def.theory, &self.state.phy, &self.state.exp, &plan);
        self.pending = None;
        if !violations.is_empty() {
            self.realignment_violations += 1;
            let detail = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
            return self.command(Event::AdaptFail {
                reason: AdaptFailReason::RealignmentViolation,
                detail,
            });
        }
        let seq = self.command(Event::AdaptSplice { plan })?;
        self.splices += 1;
        Ok(seq)
    }

    pub fn approve_plan(&mut self) -> Result<u64, EngineError> {
        let pending = self.pending.clone().ok_or(EngineError::NoPendingPlan)?;
        if self.state.phy != pending.phy && !self.plan_fits(&pending.plan) {
            self.pending = None;
            return Err(EngineError::StalePlan("PHY changed since the plan was proposed".into()));
        }
        self.splice(pending.plan)
    }

    pub fn reject_plan(&mut self) -> Result<u64, EngineError> {
        if self.pending.is_none() {
            return Err(EngineError::NoPendingPlan);
        }
        let seq = self.command(Event::AdaptFail {
            reason: AdaptFailReason::Rejected,
            detail: "operator rejected the recovery plan".into(),
        })?;
        self.pending = None;
        Ok(seq)
    }

    pub fn replace_remainder(&mut self, process: Process) -> Result<u64, EngineError> {
        self.command(Event::ReplaceRemainder { process })
    }

    pub fn force_align(&mut self) -> Result<u64, EngineError> {
        self.command(Event::ForceAlign)
    }

    pub fn abort(&mut self) -> Result<u64, EngineError> {
        let seq = self.command(Event::Abort)?;
        self.pending = None;
        Ok(seq)
    }
}

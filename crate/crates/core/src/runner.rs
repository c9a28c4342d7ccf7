//! Headless driver: assigns, starts and finishes every enabled task, pulls
//! outcomes from participant scripts, fires scripted exogenous events and
//! runs adaptation, until the run completes or needs an operator.

use std::fmt;

use serde::Serialize;

use crate::adaptation::drive;
use crate::engine::{AdaptFailReason, Engine, EngineError, EngineState, ItemStatus, Mode};
use crate::scenario::{EventTrigger, ScriptedEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Completed,
    /// Escalated; the engine waits for an operator command.
    Manual,
    Aborted,
    /// Running, but no task is enabled and nothing is in flight.
    Stalled,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Completed => "COMPLETED",
            RunStatus::Manual => "MANUAL",
            RunStatus::Aborted => "ABORTED",
            RunStatus::Stalled => "STALLED",
        })
    }
}

/// Process exit code for a finished run.
pub fn exit_code(status: RunStatus, state: &EngineState) -> i32 {
    match status {
        RunStatus::Completed => 0,
        RunStatus::Manual if state.adaptation.last_failure == Some(AdaptFailReason::ResourceLimit) => 4,
        RunStatus::Manual => 2,
        RunStatus::Aborted => 1,
        RunStatus::Stalled => 5,
    }
}

/// Tracks which scripted events have fired.
#[derive(Clone, Debug)]
pub struct EventScript {
    events: Vec<ScriptedEvent>,
    fired: Vec<bool>,
}

impl EventScript {
    pub fn new(events: Vec<ScriptedEvent>) -> Self {
        let fired = vec![false; events.len()];
        EventScript { events, fired }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Injects every event whose trigger has been reached, in script order.
    /// `after` triggers fire once the named call has finished; `at N`
    /// triggers fire once the log holds N records.
    pub fn fire_due(&mut self, engine: &mut Engine) -> Result<bool, EngineError> {
        let mut any = false;
        for (i, ev) in self.events.iter().enumerate() {
            if self.fired[i] || !matches!(engine.mode(), Mode::Running | Mode::Adapting) {
                continue;
            }
            let due = match &ev.trigger {
                EventTrigger::After(call) => engine
                    .state()
                    .items
                    .iter()
                    .any(|w| &w.call == call && w.status == ItemStatus::Released),
                EventTrigger::At(n) => engine.log().len() as u64 >= *n,
            };
            if due {
                engine.inject(&ev.event, &ev.args)?;
                self.fired[i] = true;
                any = true;
            }
        }
        Ok(any)
    }
}

fn status_of(engine: &Engine) -> Option<RunStatus> {
    match engine.mode() {
        Mode::Completed => Some(RunStatus::Completed),
        Mode::Manual => Some(RunStatus::Manual),
        Mode::Aborted => Some(RunStatus::Aborted),
        Mode::Running | Mode::Adapting => None,
    }
}

/// Performs one unit of work. Returns false when nothing could be done.
pub fn step(engine: &mut Engine, script: &mut EventScript) -> Result<bool, EngineError> {
    if script.fire_due(engine)? {
        return Ok(true);
    }
    let before = engine.log().len();
    drive(engine, None)?;
    if engine.pending_plan().is_some() {
        // headless runs approve their own plans
        engine.approve_plan()?;
    }
    if engine.log().len() != before || status_of(engine).is_some() {
        return Ok(engine.log().len() != before);
    }
    if engine.mode() == Mode::Running {
        for call in engine.enabled_tasks()? {
            match engine.assign(&call) {
                Ok(_) => return Ok(true),
                Err(EngineError::NoCapableService(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    let state = engine.state();
    if let Some(id) = state.items.iter().find(|w| w.status == ItemStatus::Assigned).map(|w| w.id) {
        engine.start_item(id)?;
        return Ok(true);
    }
    if let Some(id) = state.items.iter().find(|w| w.status == ItemStatus::Started).map(|w| w.id) {
        engine.finish_simulated(id)?;
        return Ok(true);
    }
    Ok(false)
}

/// Runs until the engine completes, escalates, aborts or stalls.
pub fn run_auto(engine: &mut Engine, script: &mut EventScript) -> Result<RunStatus, EngineError> {
    loop {
        if let Some(status) = status_of(engine) {
            return Ok(status);
        }
        if !step(engine, script)? {
            return Ok(status_of(engine).unwrap_or(RunStatus::Stalled));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scenario::parse_events_script;

    #[test]
    fn faithful_rescue_completes() {
        let mut e = Engine::in_memory(fixtures::rescue_grid()).unwrap();
        let status = run_auto(&mut e, &mut EventScript::new(vec![])).unwrap();
        assert_eq!(status, RunStatus::Completed);
        let kinds: Vec<_> = e.log().iter().map(|r| r.event.kind()).collect();
        assert_eq!(
            kinds,
            ["GENESIS", "ASSIGN", "START", "FINISH", "ASSIGN", "START", "FINISH", "COMPLETE"]
        );
    }

    #[test]
    fn exogenous_loss_is_repaired() {
        let mut e = Engine::in_memory(fixtures::rescue_grid()).unwrap();
        let events = parse_events_script(fixtures::RESCUE_GRID_EXOGENOUS_EVENTS).unwrap();
        let status = run_auto(&mut e, &mut EventScript::new(events)).unwrap();
        assert_eq!(status, RunStatus::Completed);
        let kinds: Vec<_> = e.log().iter().map(|r| r.event.kind()).collect();
        assert!(kinds.contains(&"EXOGENOUS") && kinds.contains(&"ADAPT_SPLICE"));
    }

    #[test]
    fn unsolvable_escalates_with_code_2() {
        let def = crate::scenario::parse_scenario(fixtures::RESCUE_GRID_UNSOLVABLE).unwrap();
        let mut e = Engine::in_memory(def).unwrap();
        let status = run_auto(&mut e, &mut EventScript::new(vec![])).unwrap();
        assert_eq!(status, RunStatus::Manual);
        assert_eq!(exit_code(status, e.state()), 2);
    }
}

//! Command/query surface shared by the HTTP server and tests. Every
//! command maps to exactly one engine command and answers with the
//! sequence number of the record it produced.

use serde::{Deserialize, Serialize};

use crate::adaptation::drive;
use crate::domain::{GroundFluent, Reality, Value};
use crate::engine::{AdaptFailReason, Engine, EngineError, EventRecord, Mode, WorkItem};
use crate::gateway::{ObservedAssignment, OutcomeLabel};
use crate::log::{LogSink, NullSink};
use crate::process::{Process, TaskCall};
use crate::runner::{run_auto, EventScript, RunStatus};
use crate::scenario::{parse_events_script, parse_scenario, print_process, MonitorMode, ScenarioError};

/// An error as reported over the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceError {
    pub code: String,
    pub message: String,
}

impl ServiceError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ServiceError {
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn no_scenario() -> Self {
        ServiceError::new("NO_SCENARIO", "load a scenario first")
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<EngineError> for ServiceError {
    fn from(e: EngineError) -> Self {
        ServiceError::new(e.code(), e.to_string())
    }
}

impl From<ScenarioError> for ServiceError {
    fn from(e: ScenarioError) -> Self {
        ServiceError::new(e.code(), e.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadRequest {
    /// Scenario source text.
    pub scenario: String,
    #[serde(default)]
    pub monitor: Option<MonitorMode>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Drive the run headlessly after every command.
    #[serde(default)]
    pub auto: bool,
    /// Optional events script, only used with `auto`.
    #[serde(default)]
    pub events: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub sequence: u64,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub instance: GroundFluent,
    pub exp: Option<Value>,
    pub phy: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingPlanView {
    pub plan: Vec<TaskCall>,
    /// EXP after each step, starting from PHY.
    pub trace: Vec<Reality>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub mode: Mode,
    pub clock: u64,
    pub remainder: String,
    pub remainder_term: Process,
    pub work_items: Vec<WorkItem>,
    pub exp: Reality,
    pub phy: Reality,
    pub mismatch: Vec<GroundFluent>,
    pub enabled: Vec<TaskCall>,
    pub pending_plan: Option<PendingPlanView>,
    pub last_failure: Option<AdaptFailReason>,
    pub adaptations: u32,
    pub log_length: u64,
    pub state_hash: Option<String>,
    pub auto: bool,
}

struct Session {
    engine: Engine,
    auto: Option<EventScript>,
}

/// Holds at most one run. Not thread-safe by itself; the server serializes
/// access, which gives the single-writer ordering.
#[derive(Default)]
pub struct Service {
    session: Option<Session>,
}

type Result<T> = std::result::Result<T, ServiceError>;

impl Service {
    pub fn new() -> Self {
        Service::default()
    }

    pub fn is_loaded(&self) -> bool {
        self.session.is_some()
    }

    pub fn engine(&self) -> Option<&Engine> {
        self.session.as_ref().map(|s| &s.engine)
    }

    fn session(&mut self) -> Result<&mut Session> {
        self.session.as_mut().ok_or_else(ServiceError::no_scenario)
    }

    fn engine_ref(&self) -> Result<&Engine> {
        self.engine().ok_or_else(ServiceError::no_scenario)
    }

    /// Starts a new run, replacing any previous one.
    pub fn load_scenario(&mut self, req: &LoadRequest, sink: Box<dyn LogSink + Send>) -> Result<Ack> {
        let mut def = parse_scenario(&req.scenario)?;
        if let Some(m) = req.monitor {
            def.monitor = m;
        }
        if let Some(s) = req.seed {
            def.seed = s;
        }
        let auto = if req.auto {
            let events = match &req.events {
                Some(text) => parse_events_script(text).map_err(|e| ServiceError::new("SYNTAX_ERROR", e.to_string()))?,
                None => Vec::new(),
            };
            Some(EventScript::new(events))
        } else {
            None
        };
        let engine = Engine::start(def, sink)?;
        self.session = Some(Session { engine, auto });
        self.settle()?;
        Ok(Ack {
            sequence: 0,
            mode: self.engine_ref()?.mode(),
        })
    }

    pub fn load_scenario_text(&mut self, text: &str) -> Result<Ack> {
        self.load_scenario(
            &LoadRequest {
                scenario: text.to_string(),
                ..LoadRequest::default()
            },
            Box::new(NullSink),
        )
    }

    /// Runs pending adaptation and, in auto mode, the headless driver.
    fn settle(&mut self) -> Result<()> {
        let session = self.session()?;
        match &mut session.auto {
            Some(script) => {
                run_auto(&mut session.engine, script)?;
            }
            None => drive(&mut session.engine, None)?,
        }
        Ok(())
    }

    fn run(&mut self, f: impl FnOnce(&mut Engine) -> std::result::Result<u64, EngineError>) -> Result<Ack> {
        let session = self.session()?;
        let sequence = f(&mut session.engine)?;
        self.settle()?;
        Ok(Ack {
            sequence,
            mode: self.engine_ref()?.mode(),
        })
    }

    pub fn state(&self) -> Result<StateView> {
        let e = self.engine_ref()?;
        let st = e.state();
        let pending_plan = e.pending_plan().map(|p| {
            let mut trace = Vec::with_capacity(p.plan.len() + 1);
            let mut r = st.phy.clone();
            trace.push(r.clone());
            for call in &p.plan {
                if let Some(next) = crate::adaptation::simulate_plan(&e.def().theory, &r, std::slice::from_ref(call), false) {
                    r = next;
                }
                trace.push(r.clone());
            }
            PendingPlanView {
                plan: p.plan.clone(),
                trace,
            }
        });
        Ok(StateView {
            mode: st.mode,
            clock: st.clock,
            remainder: print_process(&e.remainder()),
            remainder_term: e.remainder(),
            work_items: st.items.clone(),
            exp: st.exp.clone(),
            phy: st.phy.clone(),
            mismatch: e.mismatch(),
            enabled: e.enabled_tasks()?,
            pending_plan,
            last_failure: st.adaptation.last_failure,
            adaptations: st.adaptation.count,
            log_length: e.log().len() as u64,
            state_hash: e.last_hash().map(str::to_string),
            auto: self.session.as_ref().is_some_and(|s| s.auto.is_some()),
        })
    }

    /// One row per relevant instance where EXP and PHY disagree.
    pub fn realities_diff(&self) -> Result<Vec<DiffRow>> {
        let e = self.engine_ref()?;
        let st = e.state();
        Ok(e
            .mismatch()
            .into_iter()
            .map(|g| DiffRow {
                exp: st.exp.get(&g).cloned(),
                phy: st.phy.get(&g).cloned(),
                instance: g,
            })
            .collect())
    }

    pub fn enabled_tasks(&self) -> Result<Vec<TaskCall>> {
        Ok(self.engine_ref()?.enabled_tasks()?)
    }

    pub fn log(&self, from: u64) -> Result<Vec<EventRecord>> {
        let log = self.engine_ref()?.log();
        Ok(log.iter().skip(from as usize).cloned().collect())
    }

    pub fn assign(&mut self, call: &TaskCall) -> Result<Ack> {
        self.run(|e| e.assign(call))
    }

    pub fn start(&mut self, item: u64) -> Result<Ack> {
        self.run(|e| e.start_item(item))
    }

    /// Without `observed`, the participant script decides the outcome.
    pub fn finish(&mut self, item: u64, observed: Option<(OutcomeLabel, Vec<ObservedAssignment>)>) -> Result<Ack> {
        self.run(|e| match observed {
            Some((label, obs)) => e.finish(item, label, &obs),
            None => e.finish_simulated(item),
        })
    }

    pub fn inject_event(&mut self, event: &str, args: &[String]) -> Result<Ack> {
        self.run(|e| e.inject(event, args))
    }

    pub fn approve_plan(&mut self) -> Result<Ack> {
        self.run(Engine::approve_plan)
    }

    pub fn reject_plan(&mut self) -> Result<Ack> {
        self.run(Engine::reject_plan)
    }

    pub fn replace_remainder(&mut self, process: Process) -> Result<Ack> {
        self.run(|e| e.replace_remainder(process))
    }

    pub fn force_align(&mut self) -> Result<Ack> {
        self.run(Engine::force_align)
    }

    pub fn abort(&mut self) -> Result<Ack> {
        self.run(Engine::abort)
    }

    /// Outcome of the headless driver, if the session runs in auto mode.
    pub fn auto_status(&self) -> Option<RunStatus> {
        let s = self.session.as_ref()?;
        s.auto.as_ref()?;
        match s.engine.mode() {
            Mode::Completed => Some(RunStatus::Completed),
            Mode::Manual => Some(RunStatus::Manual),
            Mode::Aborted => Some(RunStatus::Aborted),
            _ => Some(RunStatus::Stalled),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scenario::parse_task_call;

    #[test]
    fn commands_need_a_scenario() {
        let mut s = Service::new();
        assert_eq!(s.start(0).unwrap_err().code, "NO_SCENARIO");
    }

    #[test]
    fn manual_session_round_trip() {
        let mut s = Service::new();
        s.load_scenario_text(fixtures::RESCUE_GRID).unwrap();
        let mv = parse_task_call("move(rbt1, loc_0_0, loc_0_1)").unwrap();
        assert_eq!(s.enabled_tasks().unwrap(), vec![mv.clone()]);
        assert_eq!(s.assign(&mv).unwrap().sequence, 1);
        assert_eq!(s.start(0).unwrap().sequence, 2);
        assert_eq!(s.finish(0, None).unwrap().sequence, 3);
        assert!(s.realities_diff().unwrap().is_empty());
        let ack = s.inject_event("photolost", &["loc_0_1".into()]).unwrap();
        assert_eq!(ack.sequence, 4);
        assert_eq!(s.log(4).unwrap()[0].event.kind(), "EXOGENOUS");
    }

    #[test]
    fn manual_mode_rejects_lifecycle_commands() {
        let mut s = Service::new();
        s.load_scenario_text(fixtures::RESCUE_GRID_UNSOLVABLE).unwrap();
        let mv = parse_task_call("move(rbt1, loc_0_0, loc_0_1)").unwrap();
        s.assign(&mv).unwrap();
        s.start(0).unwrap();
        s.finish(0, None).unwrap();
        assert_eq!(s.state().unwrap().mode, Mode::Manual);
        assert_eq!(s.realities_diff().unwrap().len(), 1);
        let err = s.inject_event("photolost", &["loc_0_1".into()]).unwrap_err();
        assert_eq!(err.code, "MODE_ERROR");
        s.force_align().unwrap();
        assert!(s.realities_diff().unwrap().is_empty());
        assert_eq!(s.state().unwrap().mode, Mode::Running);
    }
}

//! The repair loop: when the monitor asks for adaptation, plan from PHY to
//! EXP, splice the plan in front of the remainder, or escalate.

use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use crate::domain::{apply_effects, evaluate_formula, DomainTheory, GroundFluent, Reality};
use crate::engine::{Engine, EngineError, EngineState};
use crate::planner::{ground, search_gbfs, validate_plan, SearchConfig, SearchError};
use crate::process::TaskCall;
use crate::scenario::ScenarioDefinition;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecoveryOutcome {
    /// Always holds a plan that passed `validate_plan`.
    Spliced { plan: Vec<TaskCall> },
    Unsolvable { detail: String },
    ResourceExhausted { detail: String },
}

pub fn search_config(def: &ScenarioDefinition, cancel: Option<Arc<AtomicBool>>) -> SearchConfig {
    SearchConfig {
        node_limit: def.node_limit,
        cancel,
    }
}

/// Plans on a snapshot: PHY is the initial state, EXP on relevant fluents
/// the goal.
pub fn build_recovery(state: &EngineState, theory: &DomainTheory, config: &SearchConfig) -> RecoveryOutcome {
    let problem = match ground(theory, &state.phy, &state.exp) {
        Ok(p) => p,
        Err(e) => return RecoveryOutcome::Unsolvable { detail: e.to_string() },
    };
    match search_gbfs(&problem, config) {
        Ok((plan, _)) => {
            if let Err(d) = validate_plan(&problem, &plan) {
                // search and validation disagree: treat as no plan rather than splice garbage
                return RecoveryOutcome::Unsolvable {
                    detail: format!("planner produced an invalid plan: {d}"),
                };
            }
            RecoveryOutcome::Spliced {
                plan: plan.calls(&problem),
            }
        }
        Err(e @ SearchError::NoPlan(_)) => {
            let mut detail = e.to_string();
            if !problem.invisible_tasks.is_empty() {
                detail.push_str(&format!(
                    " (tasks outside the planner fragment: {})",
                    problem.invisible_tasks.join(", ")
                ));
            }
            RecoveryOutcome::Unsolvable { detail }
        }
        Err(e) => RecoveryOutcome::ResourceExhausted { detail: e.to_string() },
    }
}

/// Applies the plan's expected effects from `phy`. With `check_pre`, a
/// step whose precondition is false yields `None`.
pub fn simulate_plan(theory: &DomainTheory, phy: &Reality, plan: &[TaskCall], check_pre: bool) -> Option<Reality> {
    let mut r = phy.clone();
    for call in plan {
        let task = theory.task(&call.task)?;
        let binding = theory.bind(&task.params, &call.args).ok()?;
        if check_pre && !evaluate_formula(&task.precondition, &r, &binding, theory).ok()? {
            return None;
        }
        r = apply_effects(&r, &task.effects, &binding, theory).ok()?;
    }
    Some(r)
}

fn relevant_diff(theory: &DomainTheory, a: &Reality, b: &Reality) -> Vec<GroundFluent> {
    a.diff(b).into_iter().filter(|g| theory.is_relevant(&g.fluent)).collect()
}

/// Relevant instances where simulating the plan from PHY does not land on
/// EXP. Empty for every sound recovery plan.
pub fn realignment_violations(theory: &DomainTheory, phy: &Reality, exp: &Reality, plan: &[TaskCall]) -> Vec<GroundFluent> {
    match simulate_plan(theory, phy, plan, false) {
        Some(end) => relevant_diff(theory, &end, exp),
        None => relevant_diff(theory, phy, exp),
    }
}

/// The plan is executable from `phy` and realigns it with `exp`.
pub fn plan_fits(theory: &DomainTheory, phy: &Reality, exp: &Reality, plan: &[TaskCall]) -> bool {
    simulate_plan(theory, phy, plan, true).is_some_and(|end| relevant_diff(theory, &end, exp).is_empty())
}

/// Runs every adaptation the engine is ready for: ADAPT_BEGIN, planning on
/// a snapshot, then the result. Returns once the engine neither needs nor
/// awaits a plan (a plan held for approval ends the loop too), after
/// committing COMPLETE if it became due.
pub fn drive(engine: &mut Engine, cancel: Option<Arc<AtomicBool>>) -> Result<(), EngineError> {
    let config = search_config(engine.def(), cancel);
    // every round commits a record or re-plans after a PHY change; the bound
    // only guards against a livelock bug
    for _ in 0..1000 {
        if engine.needs_adaptation() {
            engine.begin_adaptation()?;
            continue;
        }
        if !engine.awaiting_plan() {
            engine.complete_if_due()?;
            return Ok(());
        }
        let snapshot = engine.state().clone();
        let outcome = build_recovery(&snapshot, &engine.def().theory, &config);
        match engine.submit_recovery(outcome, &snapshot.phy) {
            Err(EngineError::StalePlan(_)) => continue,
            r => {
                r?;
            }
        }
    }
    Err(EngineError::InvalidRecord("adaptation did not settle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GroundAssignment, Value};
    use crate::engine::Mode;
    use crate::fixtures;
    use crate::gateway::{ObservedAssignment, OutcomeLabel};
    use crate::scenario::parse_task_call;

    fn stay(e: &mut Engine) {
        e.assign(&parse_task_call("move(rbt1, loc_0_0, loc_0_1)").unwrap()).unwrap();
        e.start_item(0).unwrap();
        let obs = ObservedAssignment::ground(GroundAssignment::new(
            GroundFluent::new("at", ["rbt1"]),
            Value::object("loc_0_0"),
        ));
        e.finish(0, OutcomeLabel::Fail, &[obs]).unwrap();
    }

    #[test]
    fn single_divergence_is_spliced() {
        let mut e = Engine::in_memory(fixtures::rescue_grid()).unwrap();
        stay(&mut e);
        drive(&mut e, None).unwrap();
        assert_eq!(e.mode(), Mode::Running);
        let kinds: Vec<_> = e.log().iter().map(|r| r.event.kind()).collect();
        assert_eq!(&kinds[kinds.len() - 2..], ["ADAPT_BEGIN", "ADAPT_SPLICE"]);
        assert_eq!(
            e.enabled_tasks().unwrap(),
            vec![parse_task_call("move(rbt1, loc_0_0, loc_0_1)").unwrap()]
        );
        assert_eq!(e.realignment_violations(), 0);
        assert!(e.mismatch().is_empty());
    }

    #[test]
    fn approval_holds_the_plan() {
        let mut def = fixtures::rescue_grid();
        def.approval = true;
        let mut e = Engine::in_memory(def).unwrap();
        stay(&mut e);
        drive(&mut e, None).unwrap();
        assert_eq!(e.mode(), Mode::Adapting);
        assert_eq!(e.pending_plan().unwrap().plan.len(), 1);
        e.reject_plan().unwrap();
        assert_eq!(e.mode(), Mode::Manual);
        e.force_align().unwrap();
        assert_eq!(e.mode(), Mode::Running);
    }

    #[test]
    fn realignment_check_spots_a_wrong_plan() {
        let t = fixtures::rescue_grid_theory();
        let phy = t.initial_reality().unwrap();
        let mut exp = phy.clone();
        exp.set(GroundFluent::new("at", ["rbt1"]), Value::object("loc_0_1"));
        let good = vec![parse_task_call("move(rbt1, loc_0_0, loc_0_1)").unwrap()];
        let bad = vec![parse_task_call("move(rbt1, loc_0_0, loc_1_0)").unwrap()];
        assert!(realignment_violations(&t, &phy, &exp, &good).is_empty());
        assert_eq!(realignment_violations(&t, &phy, &exp, &bad), vec![GroundFluent::new("at", ["rbt1"])]);
        assert!(plan_fits(&t, &phy, &exp, &good));
        assert!(!plan_fits(&t, &phy, &exp, &bad));
    }
}

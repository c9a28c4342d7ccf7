//! Breadth-first search over realities, using every type-correct call.

use std::collections::{HashMap, VecDeque};

use reflow_core::domain::{apply_effects, evaluate_formula, DomainTheory, Reality};
use reflow_core::process::TaskCall;

pub fn step(theory: &DomainTheory, r: &Reality, call: &TaskCall) -> Option<Reality> {
    let task = theory.task(&call.task)?;
    let b = theory.bind(&task.params, &call.args).ok()?;
    if !evaluate_formula(&task.precondition, r, &b, theory).ok()? {
        return None;
    }
    apply_effects(r, &task.effects, &b, theory).ok()
}

/// `r` agrees with `exp` on every relevant instance `exp` assigns.
pub fn reaches(theory: &DomainTheory, r: &Reality, exp: &Reality) -> bool {
    exp.iter()
        .filter(|(g, _)| theory.is_relevant(&g.fluent))
        .all(|(g, v)| r.get(g) == Some(v))
}

pub fn every_call(theory: &DomainTheory) -> Vec<TaskCall> {
    let mut out = Vec::new();
    for task in &theory.tasks {
        for b in theory.bindings(&task.params) {
            let args = task.params.iter().map(|p| b[&p.var].clone()).collect::<Vec<_>>();
            out.push(TaskCall::new(task.name.clone(), args));
        }
    }
    out
}

/// Optimal plan length from `phy` to `exp`, or `None`, and the number of
/// states visited.
pub fn optimum(theory: &DomainTheory, phy: &Reality, exp: &Reality) -> (Option<usize>, usize) {
    let calls = every_call(theory);
    let mut dist: HashMap<Reality, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(phy.clone(), 0);
    queue.push_back(phy.clone());
    while let Some(r) = queue.pop_front() {
        let d = dist[&r];
        if reaches(theory, &r, exp) {
            return (Some(d), dist.len());
        }
        for c in &calls {
            if let Some(next) = step(theory, &r, c) {
                if !dist.contains_key(&next) {
                    dist.insert(next.clone(), d + 1);
                    queue.push_back(next);
                }
            }
        }
    }
    (None, dist.len())
}

/// Executes calls on realities, checking each precondition.
pub fn execute(theory: &DomainTheory, phy: &Reality, calls: &[TaskCall]) -> Option<Reality> {
    let mut r = phy.clone();
    for c in calls {
        r = step(theory, &r, c)?;
    }
    Some(r)
}

use std::collections::BTreeSet;
use std::fmt;

use super::{Plan, PlanningProblem};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanDiagnostic {
    /// Steps are numbered from 1.
    UnknownAction { step: usize, index: usize },
    PreconditionFailed { step: usize, action: String, missing: Vec<String> },
    GoalUnmet { missing: Vec<String> },
}

impl fmt::Display for PlanDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanDiagnostic::UnknownAction { step, index } => write!(f, "step {step}: no action #{index}"),
            PlanDiagnostic::PreconditionFailed { step, action, missing } => {
                write!(f, "step {step}: {action} needs {}", missing.join(", "))
            }
            PlanDiagnostic::GoalUnmet { missing } => write!(f, "goal not reached: {}", missing.join(", ")),
        }
    }
}

impl std::error::Error for PlanDiagnostic {}

/// Simulates `plan` from the initial state with set semantics
/// `(state \ del) ∪ add` and checks every precondition and the goal.
pub fn validate_plan(problem: &PlanningProblem, plan: &Plan) -> Result<(), PlanDiagnostic> {
    let mut state: BTreeSet<usize> = problem.init.iter().copied().collect();
    for (k, &i) in plan.steps.iter().enumerate() {
        let step = k + 1;
        let action = problem
            .actions
            .get(i)
            .ok_or(PlanDiagnostic::UnknownAction { step, index: i })?;
        let missing: Vec<usize> = action.pre.iter().copied().filter(|p| !state.contains(p)).collect();
        if !missing.is_empty() {
            return Err(PlanDiagnostic::PreconditionFailed {
                step,
                action: action.call.to_string(),
                missing: problem.describe(&missing),
            });
        }
        for d in &action.del {
            state.remove(d);
        }
        state.extend(action.add.iter().copied());
    }
    let missing: Vec<usize> = problem.goal.iter().copied().filter(|g| !state.contains(g)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(PlanDiagnostic::GoalUnmet {
            missing: problem.describe(&missing),
        })
    }
}

//! Embedded STRIPS planner: grounding from realities, the additive
//! heuristic, greedy best-first and uniform-cost search, plan validation,
//! and PDDL export.

mod ground;
mod heuristic;
mod pddl;
mod search;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, GroundFluent, Value};
use crate::process::TaskCall;

pub use ground::{compile_precondition, ground, CompiledPrecondition};
pub use heuristic::{h_add, HAdd};
pub use pddl::{escape, export_pddl, parse_plan, unescape, PddlExport};
pub use search::{search_gbfs, search_ucs, SearchConfig, SearchError, SearchStats};
pub use validate::{validate_plan, PlanDiagnostic};

/// Index of a value-atom in [`PlanningProblem::atoms`].
pub type AtomId = usize;

/// A value-atom `f(args)=v`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Proposition {
    pub instance: GroundFluent,
    pub value: Value,
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.instance, self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundAction {
    pub call: TaskCall,
    pub pre: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
}

impl GroundAction {
    pub fn cost(&self) -> u64 {
        1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanningProblem {
    pub atoms: Vec<Proposition>,
    /// Ground fluent instances; `var_of[a]` indexes into this list.
    pub instances: Vec<GroundFluent>,
    pub var_of: Vec<usize>,
    /// Atom ids per instance, in range order.
    pub domains: Vec<Vec<AtomId>>,
    pub actions: Vec<GroundAction>,
    pub init: Vec<AtomId>,
    pub goal: Vec<AtomId>,
    /// Recoverable tasks whose precondition falls outside the STRIPS fragment.
    pub invisible_tasks: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<Proposition, AtomId>,
}

impl PlanningProblem {
    pub fn atom_id(&self, p: &Proposition) -> Option<AtomId> {
        self.index.get(p).copied()
    }

    pub fn atom(&self, instance: &GroundFluent, value: &Value) -> Option<AtomId> {
        self.atom_id(&Proposition {
            instance: instance.clone(),
            value: value.clone(),
        })
    }

    /// The initial state as one atom per instance, indexed by instance.
    pub fn init_state(&self) -> Vec<AtomId> {
        let mut s = vec![0; self.instances.len()];
        for &a in &self.init {
            s[self.var_of[a]] = a;
        }
        s
    }

    pub fn action_by_call(&self, call: &TaskCall) -> Option<usize> {
        self.actions.iter().position(|a| &a.call == call)
    }

    pub fn is_goal(&self, state: &[AtomId]) -> bool {
        self.goal.iter().all(|&g| state[self.var_of[g]] == g)
    }

    pub fn applicable(&self, action: &GroundAction, state: &[AtomId]) -> bool {
        action.pre.iter().all(|&p| state[self.var_of[p]] == p)
    }

    pub fn apply(&self, action: &GroundAction, state: &[AtomId]) -> Vec<AtomId> {
        let mut next = state.to_vec();
        for &a in &action.add {
            next[self.var_of[a]] = a;
        }
        next
    }

    pub fn describe(&self, atoms: &[AtomId]) -> Vec<String> {
        atoms.iter().map(|&a| self.atoms[a].to_string()).collect()
    }
}

/// A sequence of indices into [`PlanningProblem::actions`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<usize>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn calls(&self, problem: &PlanningProblem) -> Vec<TaskCall> {
        self.steps.iter().map(|&i| problem.actions[i].call.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("UNSUPPORTED_PRECONDITION: task {task}: {detail}")]
    UnsupportedPrecondition { task: String, detail: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("reality has no value for {0}")]
    IncompleteReality(GroundFluent),
}

impl PlannerError {
    pub fn code(&self) -> &'static str {
        match self {
            PlannerError::UnsupportedPrecondition { .. } => "UNSUPPORTED_PRECONDITION",
            PlannerError::Domain(e) => e.code(),
            PlannerError::IncompleteReality(_) => "MISSING_INSTANCE",
        }
    }
}

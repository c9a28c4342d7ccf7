//! Domain theory: typed data objects, fluents, static relations, services,
//! tasks and exogenous events, plus the reality model both the engine and
//! the planner operate on.

mod formula;
mod reality;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use formula::{evaluate_formula, Assignment, Binding, FluentTerm, Formula, Operand, Term};
pub use reality::{GroundAssignment, GroundFluent, Reality, Value};
pub use validate::{
    check_formula, is_identifier, validate_domain, ValidationReport, Violation, ViolationCode, RESERVED_WORDS,
};
pub(crate) use validate::in_strips_fragment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("UNBOUND_VARIABLE: ?{0}")]
    UnboundVariable(String),
    #[error("TYPE_MISMATCH: {subject}: {detail}")]
    TypeMismatch { subject: String, detail: String },
    #[error("unknown static relation {0}")]
    UnknownStatic(String),
    #[error("unknown type {0}")]
    UnknownType(String),
    #[error("reality has no entry for {0}")]
    MissingInstance(GroundFluent),
}

impl DomainError {
    pub fn code(&self) -> &'static str {
        match self {
            DomainError::UnboundVariable(_) => "UNBOUND_VARIABLE",
            DomainError::TypeMismatch { .. } => "TYPE_MISMATCH",
            DomainError::UnknownStatic(_) => "UNKNOWN_STATIC",
            DomainError::UnknownType(_) => "UNKNOWN_TYPE",
            DomainError::MissingInstance(_) => "MISSING_INSTANCE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataType {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeType {
    Bool,
    Type(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluentSpec {
    pub name: String,
    pub params: Vec<String>,
    pub range: RangeType,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticRelation {
    pub name: String,
    pub params: Vec<String>,
    pub tuples: BTreeSet<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub id: String,
    pub provides: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub var: String,
    pub ty: String,
}

impl Param {
    pub fn new(var: impl Into<String>, ty: impl Into<String>) -> Self {
        Param {
            var: var.into(),
            ty: ty.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub params: Vec<Param>,
    pub requires: BTreeSet<String>,
    pub precondition: Formula,
    pub effects: Vec<Assignment>,
    /// Whether recovery planning may use this task.
    pub recoverable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub name: String,
    pub params: Vec<Param>,
    pub effects: Vec<Assignment>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTheory {
    pub data_types: Vec<DataType>,
    pub fluents: Vec<FluentSpec>,
    pub statics: Vec<StaticRelation>,
    pub capabilities: Vec<String>,
    pub services: Vec<ServiceSpec>,
    pub tasks: Vec<TaskSpec>,
    pub events: Vec<EventSpec>,
    /// `None` means every fluent is relevant.
    pub relevant: Option<BTreeSet<String>>,
    pub initial: Vec<GroundAssignment>,
}

impl DomainTheory {
    pub fn data_type(&self, name: &str) -> Option<&DataType> {
        self.data_types.iter().find(|t| t.name == name)
    }

    pub fn fluent(&self, name: &str) -> Option<&FluentSpec> {
        self.fluents.iter().find(|f| f.name == name)
    }

    pub fn static_relation(&self, name: &str) -> Option<&StaticRelation> {
        self.statics.iter().find(|s| s.name == name)
    }

    pub fn task(&self, name: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn event(&self, name: &str) -> Option<&EventSpec> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn service(&self, id: &str) -> Option<&ServiceSpec> {
        self.services.iter().find(|s| s.id == id)
    }

    pub fn is_relevant(&self, fluent: &str) -> bool {
        self.relevant.as_ref().is_none_or(|r| r.contains(fluent))
    }

    pub fn is_member(&self, ty: &str, object: &str) -> bool {
        self.data_type(ty)
            .is_some_and(|t| t.members.iter().any(|m| m == object))
    }

    /// Members of the fluent's range, booleans as `[false, true]`.
    pub fn range_values(&self, fluent: &FluentSpec) -> Vec<Value> {
        match &fluent.range {
            RangeType::Bool => vec![Value::Bool(false), Value::Bool(true)],
            RangeType::Type(t) => self
                .data_type(t)
                .map(|dt| dt.members.iter().cloned().map(Value::Object).collect())
                .unwrap_or_default(),
        }
    }

    pub fn value_in_range(&self, fluent: &FluentSpec, value: &Value) -> bool {
        match (&fluent.range, value) {
            (RangeType::Bool, Value::Bool(_)) => true,
            (RangeType::Type(t), Value::Object(o)) => self.is_member(t, o),
            _ => false,
        }
    }

    /// All ground instances of `fluent`, in lexicographic order of the
    /// declared member positions.
    pub fn instances(&self, fluent: &FluentSpec) -> Vec<GroundFluent> {
        cartesian(self, &fluent.params)
            .into_iter()
            .map(|args| GroundFluent {
                fluent: fluent.name.clone(),
                args,
            })
            .collect()
    }

    /// All well-typed bindings of a parameter list.
    pub fn bindings(&self, params: &[Param]) -> Vec<Binding> {
        let types: Vec<String> = params.iter().map(|p| p.ty.clone()).collect();
        cartesian(self, &types)
            .into_iter()
            .map(|objs| {
                params
                    .iter()
                    .map(|p| p.var.clone())
                    .zip(objs)
                    .collect()
            })
            .collect()
    }

    /// Builds the binding for a call with concrete arguments, checking arity
    /// and membership.
    pub fn bind(&self, params: &[Param], args: &[String]) -> Result<Binding, DomainError> {
        if params.len() != args.len() {
            return Err(DomainError::TypeMismatch {
                subject: format!("({})", args.join(", ")),
                detail: format!("expected {} arguments, got {}", params.len(), args.len()),
            });
        }
        params
            .iter()
            .zip(args)
            .map(|(p, a)| {
                if self.is_member(&p.ty, a) {
                    Ok((p.var.clone(), a.clone()))
                } else {
                    Err(DomainError::TypeMismatch {
                        subject: a.clone(),
                        detail: format!("not a member of {}", p.ty),
                    })
                }
            })
            .collect()
    }

    /// Checks a ground assignment against fluent arity, argument types and range.
    pub fn check_ground(&self, a: &GroundAssignment) -> Result<(), DomainError> {
        let mismatch = |detail: String| DomainError::TypeMismatch {
            subject: a.target().to_string(),
            detail,
        };
        let spec = self
            .fluent(&a.fluent)
            .ok_or_else(|| mismatch("unknown fluent".into()))?;
        if spec.params.len() != a.args.len() {
            return Err(mismatch(format!(
                "arity {} expected, got {}",
                spec.params.len(),
                a.args.len()
            )));
        }
        for (ty, arg) in spec.params.iter().zip(&a.args) {
            if !self.is_member(ty, arg) {
                return Err(mismatch(format!("{arg} is not a member of {ty}")));
            }
        }
        if !self.value_in_range(spec, &a.value) {
            return Err(mismatch(format!("value {} outside range", a.value)));
        }
        Ok(())
    }

    /// The initial reality: explicit initial assignments, booleans defaulting
    /// to false. Fails if an enumerated instance is left unassigned.
    pub fn initial_reality(&self) -> Result<Reality, Vec<GroundFluent>> {
        let explicit: BTreeMap<GroundFluent, &Value> =
            self.initial.iter().map(|a| (a.target(), &a.value)).collect();
        let mut reality = Reality::new();
        let mut missing = Vec::new();
        for spec in &self.fluents {
            for inst in self.instances(spec) {
                match (explicit.get(&inst), &spec.range) {
                    (Some(v), _) => {
                        reality.set(inst, (*v).clone());
                    }
                    (None, RangeType::Bool) => {
                        reality.set(inst, Value::Bool(false));
                    }
                    (None, RangeType::Type(_)) => missing.push(inst),
                }
            }
        }
        if missing.is_empty() {
            Ok(reality)
        } else {
            Err(missing)
        }
    }
}

fn cartesian(theory: &DomainTheory, types: &[String]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![Vec::new()];
    for ty in types {
        let members = theory
            .data_type(ty)
            .map(|t| t.members.as_slice())
            .unwrap_or_default();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                members.iter().map(move |m| {
                    let mut next = prefix.clone();
                    next.push(m.clone());
                    next
                })
            })
            .collect();
    }
    out
}

/// Instantiates lifted effects under a binding, in declared order.
pub fn instantiate_effects(
    effects: &[Assignment],
    binding: &Binding,
) -> Result<Vec<GroundAssignment>, DomainError> {
    effects
        .iter()
        .map(|e| {
            Ok(GroundAssignment::new(
                e.target.ground(binding)?,
                e.value.resolve_value(binding)?,
            ))
        })
        .collect()
}

/// Applies ground assignments in order (last writer wins) and returns the
/// updated reality. The input is left untouched.
pub fn apply_ground(
    r: &Reality,
    assignments: &[GroundAssignment],
    theory: &DomainTheory,
) -> Result<Reality, DomainError> {
    let mut out = r.clone();
    for a in assignments {
        theory.check_ground(a)?;
        out.set(a.target(), a.value.clone());
    }
    Ok(out)
}

pub fn apply_effects(
    r: &Reality,
    effects: &[Assignment],
    binding: &Binding,
    theory: &DomainTheory,
) -> Result<Reality, DomainError> {
    apply_ground(r, &instantiate_effects(effects, binding)?, theory)
}

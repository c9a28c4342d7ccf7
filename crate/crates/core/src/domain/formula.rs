use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DomainError, DomainTheory, GroundFluent, Reality, Value};

/// Variable name to data object.
pub type Binding = BTreeMap<String, String>;

/// A term in argument or value position. Variables are written `?name` in
/// scenario text; the stored name omits the `?`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Object(String),
    Bool(bool),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn object(name: impl Into<String>) -> Self {
        Term::Object(name.into())
    }

    /// Resolves the term to a data object under `binding`.
    pub fn resolve_object(&self, binding: &Binding) -> Result<String, DomainError> {
        match self {
            Term::Var(v) => binding
                .get(v)
                .cloned()
                .ok_or_else(|| DomainError::UnboundVariable(v.clone())),
            Term::Object(o) => Ok(o.clone()),
            Term::Bool(b) => Err(DomainError::TypeMismatch {
                subject: b.to_string(),
                detail: "boolean literal used as an argument".into(),
            }),
        }
    }

    pub fn resolve_value(&self, binding: &Binding) -> Result<Value, DomainError> {
        match self {
            Term::Bool(b) => Ok(Value::Bool(*b)),
            other => other.resolve_object(binding).map(Value::Object),
        }
    }
}

/// A fluent applied to argument terms, e.g. `at(?r)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FluentTerm {
    pub fluent: String,
    pub args: Vec<Term>,
}

impl FluentTerm {
    pub fn new(fluent: impl Into<String>, args: Vec<Term>) -> Self {
        FluentTerm {
            fluent: fluent.into(),
            args,
        }
    }

    pub fn ground(&self, binding: &Binding) -> Result<GroundFluent, DomainError> {
        Ok(GroundFluent {
            fluent: self.fluent.clone(),
            args: self
                .args
                .iter()
                .map(|a| a.resolve_object(binding))
                .collect::<Result<_, _>>()?,
        })
    }
}

/// Right-hand side of a comparison.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operand {
    Term(Term),
    Fluent(FluentTerm),
}

/// Lifted assignment `f(args) := value` used in task and event effects.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub target: FluentTerm,
    pub value: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    Eq(FluentTerm, Operand),
    Neq(FluentTerm, Operand),
    Static(String, Vec<Term>),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Forall(String, String, Box<Formula>),
    Exists(String, String, Box<Formula>),
}

impl Formula {
    pub fn eq(lhs: FluentTerm, rhs: Term) -> Self {
        Formula::Eq(lhs, Operand::Term(rhs))
    }

    pub fn negate(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    /// Free variables in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }

    /// True if the formula mentions no dynamic fluent.
    pub fn is_static(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Static(..) => true,
            Formula::Eq(..) | Formula::Neq(..) => false,
            Formula::Not(f) | Formula::Forall(_, _, f) | Formula::Exists(_, _, f) => f.is_static(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_static),
        }
    }
}

fn push_unique(out: &mut Vec<String>, v: &str) {
    if !out.iter().any(|x| x == v) {
        out.push(v.to_string());
    }
}

fn term_free(t: &Term, bound: &[String], out: &mut Vec<String>) {
    if let Term::Var(v) = t {
        if !bound.contains(v) {
            push_unique(out, v);
        }
    }
}

fn collect_free(f: &Formula, bound: &mut Vec<String>, out: &mut Vec<String>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Eq(l, r) | Formula::Neq(l, r) => {
            l.args.iter().for_each(|t| term_free(t, bound, out));
            match r {
                Operand::Term(t) => term_free(t, bound, out),
                Operand::Fluent(ft) => ft.args.iter().for_each(|t| term_free(t, bound, out)),
            }
        }
        Formula::Static(_, args) => args.iter().for_each(|t| term_free(t, bound, out)),
        Formula::Not(g) => collect_free(g, bound, out),
        Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| collect_free(g, bound, out)),
        Formula::Forall(v, _, g) | Formula::Exists(v, _, g) => {
            bound.push(v.clone());
            collect_free(g, bound, out);
            bound.pop();
        }
    }
}

fn lookup(r: &Reality, instance: GroundFluent) -> Result<Value, DomainError> {
    r.get(&instance)
        .cloned()
        .ok_or(DomainError::MissingInstance(instance))
}

fn operand_value(
    op: &Operand,
    r: &Reality,
    binding: &Binding,
) -> Result<Value, DomainError> {
    match op {
        Operand::Term(t) => t.resolve_value(binding),
        Operand::Fluent(ft) => lookup(r, ft.ground(binding)?),
    }
}

/// Compositional truth value of `f` in reality `r`; quantifiers range over
/// the declared member list of their type.
pub fn evaluate_formula(
    f: &Formula,
    r: &Reality,
    binding: &Binding,
    theory: &DomainTheory,
) -> Result<bool, DomainError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Eq(lhs, rhs) => lookup(r, lhs.ground(binding)?)? == operand_value(rhs, r, binding)?,
        Formula::Neq(lhs, rhs) => lookup(r, lhs.ground(binding)?)? != operand_value(rhs, r, binding)?,
        Formula::Static(name, args) => {
            let rel = theory
                .static_relation(name)
                .ok_or_else(|| DomainError::UnknownStatic(name.clone()))?;
            let tuple: Vec<String> = args
                .iter()
                .map(|a| a.resolve_object(binding))
                .collect::<Result<_, _>>()?;
            rel.tuples.contains(&tuple)
        }
        Formula::Not(g) => !evaluate_formula(g, r, binding, theory)?,
        Formula::And(gs) => {
            for g in gs {
                if !evaluate_formula(g, r, binding, theory)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(gs) => {
            for g in gs {
                if evaluate_formula(g, r, binding, theory)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Forall(var, ty, g) | Formula::Exists(var, ty, g) => {
            let members = &theory
                .data_type(ty)
                .ok_or_else(|| DomainError::UnknownType(ty.clone()))?
                .members;
            let universal = matches!(f, Formula::Forall(..));
            let mut inner = binding.clone();
            for m in members {
                inner.insert(var.clone(), m.clone());
                if evaluate_formula(g, r, &inner, theory)? != universal {
                    return Ok(!universal);
                }
            }
            universal
        }
    })
}

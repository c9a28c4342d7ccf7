use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    Assignment, DomainTheory, FluentTerm, Formula, Operand, Param, RangeType, Term,
};

/// Words the scenario grammar claims; they cannot name anything.
pub const RESERVED_WORDS: &[&str] = &[
    "and", "or", "not", "forall", "exists", "true", "false", "if", "then", "else", "while", "do",
    "seq", "par", "empty", "bool",
];

/// `[a-z][a-zA-Z0-9_]*`, excluding reserved words.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED_WORDS.contains(&s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    InvalidIdentifier,
    DuplicateName,
    EmptyType,
    UnknownType,
    UnknownFluent,
    UnknownStatic,
    UnknownCapability,
    UnknownService,
    UnknownTask,
    UnknownEvent,
    ArityMismatch,
    NonMember,
    UnboundVariable,
    TypeMismatch,
    DuplicateAssignment,
    NonTotalInitial,
    InvalidProcess,
    InvalidScript,
    InvalidRule,
    PlannerInvisible,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::InvalidIdentifier => "INVALID_IDENTIFIER",
            ViolationCode::DuplicateName => "DUPLICATE_NAME",
            ViolationCode::EmptyType => "EMPTY_TYPE",
            ViolationCode::UnknownType => "UNKNOWN_TYPE",
            ViolationCode::UnknownFluent => "UNKNOWN_FLUENT",
            ViolationCode::UnknownStatic => "UNKNOWN_STATIC",
            ViolationCode::UnknownCapability => "UNKNOWN_CAPABILITY",
            ViolationCode::UnknownService => "UNKNOWN_SERVICE",
            ViolationCode::UnknownTask => "UNKNOWN_TASK",
            ViolationCode::UnknownEvent => "UNKNOWN_EVENT",
            ViolationCode::ArityMismatch => "ARITY_MISMATCH",
            ViolationCode::NonMember => "NON_MEMBER",
            ViolationCode::UnboundVariable => "UNBOUND_VARIABLE",
            ViolationCode::TypeMismatch => "TYPE_MISMATCH",
            ViolationCode::DuplicateAssignment => "DUPLICATE_ASSIGNMENT",
            ViolationCode::NonTotalInitial => "NON_TOTAL_INITIAL",
            ViolationCode::InvalidProcess => "INVALID_PROCESS",
            ViolationCode::InvalidScript => "INVALID_SCRIPT",
            ViolationCode::InvalidRule => "INVALID_RULE",
            ViolationCode::PlannerInvisible => "PLANNER_INVISIBLE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// The declaration the violation belongs to, e.g. `task move`.
    pub subject: String,
    pub detail: String,
}

impl Violation {
    pub fn new(code: ViolationCode, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        Violation {
            code,
            subject: subject.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in {}: {}", self.code.as_str(), self.subject, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

struct Checker<'a> {
    theory: &'a DomainTheory,
    report: ValidationReport,
}

impl Checker<'_> {
    fn push(&mut self, code: ViolationCode, subject: &str, detail: impl Into<String>) {
        self.report.violations.push(Violation::new(code, subject, detail));
    }

    fn ident(&mut self, subject: &str, name: &str) {
        if !is_identifier(name) {
            self.push(
                ViolationCode::InvalidIdentifier,
                subject,
                format!("{name:?} is not a valid identifier"),
            );
        }
    }

    fn unique<'n>(&mut self, subject: &str, names: impl IntoIterator<Item = &'n String>) {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n) {
                self.push(ViolationCode::DuplicateName, subject, format!("{n} declared twice"));
            }
        }
    }

    fn known_type(&mut self, subject: &str, ty: &str) -> bool {
        if self.theory.data_type(ty).is_some() {
            true
        } else {
            self.push(ViolationCode::UnknownType, subject, format!("unknown type {ty}"));
            false
        }
    }

    fn types(&mut self) {
        let t = self.theory;
        self.unique("types", t.data_types.iter().map(|d| &d.name));
        for dt in &t.data_types {
            let subject = format!("type {}", dt.name);
            self.ident(&subject, &dt.name);
            if dt.members.is_empty() {
                self.push(ViolationCode::EmptyType, &subject, "type has no members");
            }
            for m in &dt.members {
                self.ident(&subject, m);
            }
            self.unique(&subject, dt.members.iter());
        }
    }

    fn fluents_and_statics(&mut self) {
        let t = self.theory;
        self.unique(
            "fluents",
            t.fluents.iter().map(|f| &f.name).chain(t.statics.iter().map(|s| &s.name)),
        );
        for f in &t.fluents {
            let subject = format!("fluent {}", f.name);
            self.ident(&subject, &f.name);
            for p in &f.params {
                self.known_type(&subject, p);
            }
            if let RangeType::Type(r) = &f.range {
                self.known_type(&subject, r);
            }
        }
        for s in &t.statics {
            let subject = format!("static {}", s.name);
            self.ident(&subject, &s.name);
            let ok = s.params.iter().all(|p| self.known_type(&subject, p));
            for tuple in &s.tuples {
                if tuple.len() != s.params.len() {
                    self.push(
                        ViolationCode::ArityMismatch,
                        &subject,
                        format!("tuple ({}) has arity {}", tuple.join(", "), tuple.len()),
                    );
                    continue;
                }
                if ok {
                    for (ty, obj) in s.params.iter().zip(tuple) {
                        if !t.is_member(ty, obj) {
                            self.push(
                                ViolationCode::NonMember,
                                &subject,
                                format!("{obj} is not a member of {ty}"),
                            );
                        }
                    }
                }
            }
        }
    }

    fn services(&mut self) {
        let t = self.theory;
        self.unique("capabilities", t.capabilities.iter());
        for c in &t.capabilities {
            self.ident("capabilities", c);
        }
        self.unique("services", t.services.iter().map(|s| &s.id));
        for s in &t.services {
            let subject = format!("service {}", s.id);
            self.ident(&subject, &s.id);
            for c in &s.provides {
                self.capability(&subject, c);
            }
        }
    }

    fn capability(&mut self, subject: &str, c: &str) {
        if !self.theory.capabilities.iter().any(|x| x == c) {
            self.push(ViolationCode::UnknownCapability, subject, format!("unknown capability {c}"));
        }
    }

    fn params(&mut self, subject: &str, params: &[Param]) -> Vec<(String, String)> {
        self.unique(subject, params.iter().map(|p| &p.var));
        for p in params {
            self.ident(subject, &p.var);
            self.known_type(subject, &p.ty);
        }
        params.iter().map(|p| (p.var.clone(), p.ty.clone())).collect()
    }

    /// Checks `term` as an argument of type `ty`.
    fn arg(&mut self, subject: &str, scope: &[(String, String)], term: &Term, ty: &str) {
        match term {
            Term::Var(v) => match scope.iter().rev().find(|(n, _)| n == v) {
                None => self.push(ViolationCode::UnboundVariable, subject, format!("?{v} is not bound")),
                Some((_, vt)) if vt != ty => self.push(
                    ViolationCode::TypeMismatch,
                    subject,
                    format!("?{v} has type {vt}, expected {ty}"),
                ),
                Some(_) => {}
            },
            Term::Object(o) => {
                if self.theory.data_type(ty).is_some() && !self.theory.is_member(ty, o) {
                    self.push(ViolationCode::NonMember, subject, format!("{o} is not a member of {ty}"));
                }
            }
            Term::Bool(b) => self.push(
                ViolationCode::TypeMismatch,
                subject,
                format!("boolean {b} used where {ty} is expected"),
            ),
        }
    }

    /// Checks a fluent term and returns its range when the fluent is known.
    fn fluent_term(
        &mut self,
        subject: &str,
        scope: &[(String, String)],
        ft: &FluentTerm,
    ) -> Option<RangeType> {
        let Some(spec) = self.theory.fluent(&ft.fluent) else {
            self.push(ViolationCode::UnknownFluent, subject, format!("unknown fluent {}", ft.fluent));
            return None;
        };
        if spec.params.len() != ft.args.len() {
            self.push(
                ViolationCode::ArityMismatch,
                subject,
                format!("{} takes {} arguments, got {}", ft.fluent, spec.params.len(), ft.args.len()),
            );
            return Some(spec.range.clone());
        }
        for (ty, a) in spec.params.iter().zip(&ft.args) {
            self.arg(subject, scope, a, ty);
        }
        Some(spec.range.clone())
    }

    /// Checks that `term` is a valid value for a fluent with `range`.
    fn value(
        &mut self,
        subject: &str,
        scope: &[(String, String)],
        fluent: &str,
        range: &RangeType,
        term: &Term,
    ) {
        match (range, term) {
            (RangeType::Bool, Term::Bool(_)) => {}
            (RangeType::Bool, other) => self.push(
                ViolationCode::TypeMismatch,
                subject,
                format!("boolean fluent {fluent} given non-boolean value {}", show_term(other)),
            ),
            (RangeType::Type(t), Term::Bool(b)) => self.push(
                ViolationCode::TypeMismatch,
                subject,
                format!("fluent {fluent} ranges over {t}, got boolean {b}"),
            ),
            (RangeType::Type(t), Term::Object(o)) => {
                if !self.theory.is_member(t, o) {
                    self.push(
                        ViolationCode::TypeMismatch,
                        subject,
                        format!("fluent {fluent} ranges over {t}, {o} is not a member"),
                    );
                }
            }
            (RangeType::Type(t), v @ Term::Var(_)) => self.arg(subject, scope, v, t),
        }
    }

    fn formula(&mut self, subject: &str, scope: &mut Vec<(String, String)>, f: &Formula) {
        match f {
            Formula::True | Formula::False => {}
            Formula::Eq(lhs, rhs) | Formula::Neq(lhs, rhs) => {
                let Some(range) = self.fluent_term(subject, scope, lhs) else {
                    return;
                };
                match rhs {
                    Operand::Term(t) => self.value(subject, scope, &lhs.fluent, &range, t),
                    Operand::Fluent(ft) => {
                        if let Some(other) = self.fluent_term(subject, scope, ft) {
                            if other != range {
                                self.push(
                                    ViolationCode::TypeMismatch,
                                    subject,
                                    format!("{} and {} have different ranges", lhs.fluent, ft.fluent),
                                );
                            }
                        }
                    }
                }
            }
            Formula::Static(name, args) => {
                let Some(rel) = self.theory.static_relation(name) else {
                    self.push(ViolationCode::UnknownStatic, subject, format!("unknown static {name}"));
                    return;
                };
                if rel.params.len() != args.len() {
                    self.push(
                        ViolationCode::ArityMismatch,
                        subject,
                        format!("{name} takes {} arguments, got {}", rel.params.len(), args.len()),
                    );
                    return;
                }
                for (ty, a) in rel.params.iter().zip(args) {
                    self.arg(subject, scope, a, ty);
                }
            }
            Formula::Not(g) => self.formula(subject, scope, g),
            Formula::And(gs) | Formula::Or(gs) => {
                for g in gs {
                    self.formula(subject, scope, g);
                }
            }
            Formula::Forall(v, ty, g) | Formula::Exists(v, ty, g) => {
                self.ident(subject, v);
                if scope.iter().any(|(n, _)| n == v) {
                    self.push(ViolationCode::DuplicateName, subject, format!("?{v} shadows a binding"));
                }
                self.known_type(subject, ty);
                scope.push((v.clone(), ty.clone()));
                self.formula(subject, scope, g);
                scope.pop();
            }
        }
    }

    fn effects(&mut self, subject: &str, scope: &[(String, String)], effects: &[Assignment]) {
        let mut seen = BTreeSet::new();
        for e in effects {
            if !seen.insert(&e.target) {
                self.push(
                    ViolationCode::DuplicateAssignment,
                    subject,
                    format!("{} assigned more than once", e.target.fluent),
                );
            }
            if let Some(range) = self.fluent_term(subject, scope, &e.target) {
                self.value(subject, scope, &e.target.fluent, &range, &e.value);
            }
        }
    }

    fn tasks_and_events(&mut self) {
        let t = self.theory;
        self.unique("tasks", t.tasks.iter().map(|x| &x.name));
        self.unique("events", t.events.iter().map(|x| &x.name));
        for task in &t.tasks {
            let subject = format!("task {}", task.name);
            self.ident(&subject, &task.name);
            let mut scope = self.params(&subject, &task.params);
            for c in &task.requires {
                self.capability(&subject, c);
            }
            self.formula(&subject, &mut scope, &task.precondition);
            self.effects(&subject, &scope, &task.effects);
            if task.recoverable && !in_strips_fragment(&task.precondition) {
                self.report.warnings.push(Violation::new(
                    ViolationCode::PlannerInvisible,
                    &subject,
                    "precondition uses disjunction or negation over dynamic fluents; \
                     the task is not available to recovery planning",
                ));
            }
        }
        for ev in &t.events {
            let subject = format!("event {}", ev.name);
            self.ident(&subject, &ev.name);
            let scope = self.params(&subject, &ev.params);
            self.effects(&subject, &scope, &ev.effects);
        }
    }

    fn relevant_and_initial(&mut self) {
        let t = self.theory;
        if let Some(rel) = &t.relevant {
            for f in rel {
                if t.fluent(f).is_none() {
                    self.push(ViolationCode::UnknownFluent, "relevant", format!("unknown fluent {f}"));
                }
            }
        }
        let mut seen = BTreeMap::new();
        let mut well_typed = true;
        for a in &t.initial {
            if let Err(e) = t.check_ground(a) {
                well_typed = false;
                let code = if t.fluent(&a.fluent).is_none() {
                    ViolationCode::UnknownFluent
                } else {
                    ViolationCode::TypeMismatch
                };
                self.push(code, "init", e.to_string());
            }
            if seen.insert(a.target(), ()).is_some() {
                self.push(
                    ViolationCode::DuplicateAssignment,
                    "init",
                    format!("{} assigned more than once", a.target()),
                );
            }
        }
        // fluents over unknown types have no instances, so they do not hide
        // gaps in the others
        if well_typed {
            if let Err(missing) = t.initial_reality() {
                for m in missing {
                    self.push(ViolationCode::NonTotalInitial, "init", format!("{m} has no initial value"));
                }
            }
        }
    }
}

fn show_term(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("?{v}"),
        Term::Object(o) => o.clone(),
        Term::Bool(b) => b.to_string(),
    }
}

/// Whether a precondition compiles to a STRIPS conjunction: positive
/// equalities between a fluent and a term, static atoms, conjunctions and
/// universal quantifiers. Sub-formulas over static relations only are
/// always accepted since they are decided during grounding.
pub(crate) fn in_strips_fragment(f: &Formula) -> bool {
    if f.is_static() {
        return true;
    }
    match f {
        Formula::Eq(_, Operand::Term(_)) => true,
        Formula::And(gs) => gs.iter().all(in_strips_fragment),
        Formula::Forall(_, _, g) => in_strips_fragment(g),
        _ => false,
    }
}

/// Type-checks a formula with no enclosing parameters.
pub fn check_formula(theory: &DomainTheory, subject: &str, f: &Formula) -> Vec<Violation> {
    let mut c = Checker {
        theory,
        report: ValidationReport::default(),
    };
    c.formula(subject, &mut Vec::new(), f);
    c.report.violations
}

/// Returns every violation in `theory`; an empty violation list means valid.
pub fn validate_domain(theory: &DomainTheory) -> ValidationReport {
    let mut c = Checker {
        theory,
        report: ValidationReport::default(),
    };
    c.types();
    c.fluents_and_statics();
    c.services();
    c.tasks_and_events();
    c.relevant_and_initial();
    c.report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FluentSpec, TaskSpec};
    use crate::fixtures;

    #[test]
    fn empty_theory_is_valid() {
        assert!(validate_domain(&DomainTheory::default()).is_ok());
    }

    #[test]
    fn rescue_grid_is_valid() {
        let report = validate_domain(&fixtures::rescue_grid_theory());
        assert!(report.is_ok(), "{:?}", report.violations);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn location_assigned_to_boolean_fluent() {
        let mut t = fixtures::rescue_grid_theory();
        let task = t.tasks.iter_mut().find(|x| x.name == "takephoto").unwrap();
        task.effects[0].value = Term::object("loc_0_1");
        let report = validate_domain(&t);
        assert_eq!(report.codes(), vec![ViolationCode::TypeMismatch]);
        let v = &report.violations[0];
        assert_eq!(v.subject, "task takephoto");
        assert!(v.detail.contains("photoTaken"), "{v}");
    }

    #[test]
    fn collects_all_violations() {
        let mut t = fixtures::rescue_grid_theory();
        t.fluents.push(FluentSpec {
            name: "at".into(),
            params: vec!["nowhere".into()],
            range: RangeType::Bool,
        });
        t.tasks.push(TaskSpec {
            name: "bad".into(),
            params: vec![],
            requires: ["teleport".to_string()].into(),
            precondition: Formula::eq(
                FluentTerm::new("at", vec![Term::var("r")]),
                Term::object("loc_0_0"),
            ),
            effects: vec![],
            recoverable: true,
        });
        t.initial.retain(|a| a.args != ["rbt1"]);
        let codes: BTreeSet<_> = validate_domain(&t).codes().into_iter().collect();
        for expected in [
            ViolationCode::DuplicateName,
            ViolationCode::UnknownType,
            ViolationCode::UnknownCapability,
            ViolationCode::UnboundVariable,
            ViolationCode::NonTotalInitial,
        ] {
            assert!(codes.contains(&expected), "missing {expected:?} in {codes:?}");
        }
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("loc_0_0"));
        assert!(is_identifier("photoTaken"));
        assert!(!is_identifier("Location"));
        assert!(!is_identifier("0abc"));
        assert!(!is_identifier("and"));
        assert!(!is_identifier("a-b"));
    }

    #[test]
    fn disjunctive_precondition_warns() {
        let mut t = fixtures::rescue_grid_theory();
        let task = t.tasks.iter_mut().find(|x| x.name == "takephoto").unwrap();
        let pre = task.precondition.clone();
        task.precondition = Formula::Or(vec![pre, Formula::False]);
        let report = validate_domain(&t);
        assert!(report.is_ok());
        assert_eq!(report.warnings[0].code, ViolationCode::PlannerInvisible);
    }
}

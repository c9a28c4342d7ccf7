//! Typed STRIPS PDDL export.
//!
//! Escape table for identifiers (applied to types, objects, fluents, static
//! relations, tasks and variables):
//!
//! | source            | PDDL              |
//! |-------------------|-------------------|
//! | `a`-`z`, `0`-`9`  | unchanged         |
//! | `_`               | `_u`              |
//! | `A`-`Z`           | `_c` + lowercase  |
//! | PDDL keyword      | name + `_k`       |
//!
//! Escaped names never contain `_a`, `_e`, `_t` or `_v`, so the generated
//! suffixes below cannot collide with user names:
//!
//! * fluent `f` becomes the predicate `f_eq` whose last argument is the value,
//! * the boolean range is the type `bool_t` with constants `true_v`, `false_v`,
//! * a ground action for `t(a, b)` is named `t_aa_ab` (escaped parts joined by `_a`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use thiserror::Error;

use super::{Plan, PlanningProblem};
use crate::domain::{DomainTheory, FluentTerm, Formula, Operand, RangeType, TaskSpec, Term, Value};
use crate::process::TaskCall;

const PDDL_KEYWORDS: &[&str] = &[
    "and", "define", "domain", "either", "exists", "forall", "imply", "not", "number", "object", "or",
    "problem", "when",
];

pub fn escape(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 4);
    for c in name.chars() {
        match c {
            '_' => out.push_str("_u"),
            'A'..='Z' => {
                out.push_str("_c");
                out.push(c.to_ascii_lowercase());
            }
            _ => out.push(c),
        }
    }
    if PDDL_KEYWORDS.contains(&out.as_str()) {
        out.push_str("_k");
    }
    out
}

/// Inverse of [`escape`]; `None` for strings `escape` cannot produce.
pub fn unescape(s: &str) -> Option<String> {
    let s = s.strip_suffix("_k").unwrap_or(s);
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '_' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            'u' => out.push('_'),
            'c' => out.push(chars.next()?.to_ascii_uppercase()),
            _ => return None,
        }
    }
    Some(out)
}

fn value_name(v: &Value) -> String {
    match v {
        Value::Bool(true) => "true_v".into(),
        Value::Bool(false) => "false_v".into(),
        Value::Object(o) => escape(o),
    }
}

fn term_name(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("?{}", escape(v)),
        Term::Object(o) => escape(o),
        Term::Bool(b) => value_name(&Value::Bool(*b)),
    }
}

fn range_type(range: &RangeType) -> String {
    match range {
        RangeType::Bool => "bool_t".into(),
        RangeType::Type(t) => escape(t),
    }
}

fn atom(fluent: &str, args: impl IntoIterator<Item = String>, value: String) -> String {
    let mut parts = vec![format!("{}_eq", escape(fluent))];
    parts.extend(args);
    parts.push(value);
    format!("({})", parts.join(" "))
}

fn fluent_atom(ft: &FluentTerm, value: &Term) -> String {
    atom(&ft.fluent, ft.args.iter().map(term_name), term_name(value))
}

fn conj(items: &[String]) -> String {
    match items {
        [] => "(and)".into(),
        [one] => one.clone(),
        _ => format!("(and {})", items.join(" ")),
    }
}

struct Lifted {
    pre: Vec<String>,
    eff: Vec<String>,
}

/// A task is exported lifted when its precondition is a flat conjunction of
/// equalities and static atoms, at most one effect touches each fluent, and
/// every effect's old value is either fixed by the precondition or the new
/// value is a constant (so the remaining values can be deleted explicitly).
fn lift(task: &TaskSpec, theory: &DomainTheory) -> Option<Lifted> {
    fn conjuncts<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) -> bool {
        match f {
            Formula::True => true,
            Formula::And(gs) => gs.iter().all(|g| conjuncts(g, out)),
            Formula::Eq(_, Operand::Term(_)) | Formula::Static(..) => {
                out.push(f);
                true
            }
            _ => false,
        }
    }
    let mut parts = Vec::new();
    if !conjuncts(&task.precondition, &mut parts) {
        return None;
    }
    let mut pre = Vec::new();
    let mut fixed: BTreeMap<&FluentTerm, &Term> = BTreeMap::new();
    for f in &parts {
        match f {
            Formula::Eq(ft, Operand::Term(t)) => {
                pre.push(fluent_atom(ft, t));
                fixed.entry(ft).or_insert(t);
            }
            Formula::Static(name, args) => {
                let mut p = vec![escape(name)];
                p.extend(args.iter().map(term_name));
                pre.push(format!("({})", p.join(" ")));
            }
            _ => unreachable!(),
        }
    }
    let mut seen = BTreeSet::new();
    let mut add = Vec::new();
    let mut del = Vec::new();
    for e in &task.effects {
        if !seen.insert(&e.target.fluent) {
            return None;
        }
        add.push(fluent_atom(&e.target, &e.value));
        if let Some(old) = fixed.get(&e.target) {
            if *old != &e.value {
                del.push(format!("(not {})", fluent_atom(&e.target, old)));
            }
            continue;
        }
        let new_value = match &e.value {
            Term::Var(_) => return None,
            Term::Object(o) => Value::Object(o.clone()),
            Term::Bool(b) => Value::Bool(*b),
        };
        let spec = theory.fluent(&e.target.fluent)?;
        for v in theory.range_values(spec) {
            if v != new_value {
                let args = e.target.args.iter().map(term_name);
                del.push(format!("(not {})", atom(&e.target.fluent, args, value_name(&v))));
            }
        }
    }
    add.extend(del);
    Some(Lifted { pre, eff: add })
}

pub fn ground_action_name(call: &TaskCall) -> String {
    let mut name = escape(&call.task);
    for a in &call.args {
        name.push_str("_a");
        name.push_str(&escape(a));
    }
    name
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PddlExport {
    pub domain: String,
    pub problem: String,
}

fn problem_atom(problem: &PlanningProblem, id: usize) -> String {
    let p = &problem.atoms[id];
    atom(
        &p.instance.fluent,
        p.instance.args.iter().map(|a| escape(a)),
        value_name(&p.value),
    )
}

/// Renders the domain and problem files. Declarations are sorted so the
/// output depends only on the problem and theory contents.
pub fn export_pddl(problem: &PlanningProblem, theory: &DomainTheory) -> PddlExport {
    let mut d = String::new();
    d.push_str("(define (domain adapt)\n  (:requirements :strips :typing)\n");

    let has_bool = theory.fluents.iter().any(|f| f.range == RangeType::Bool);
    let mut types: Vec<String> = theory.data_types.iter().map(|t| escape(&t.name)).collect();
    types.sort();
    if has_bool {
        types.push("bool_t".into());
    }
    let _ = writeln!(d, "  (:types {} - object)", types.join(" "));

    let mut constants: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut declared = BTreeSet::new();
    for t in &theory.data_types {
        for m in &t.members {
            if declared.insert(m.clone()) {
                constants.entry(escape(&t.name)).or_default().insert(escape(m));
            }
        }
    }
    if has_bool {
        constants.insert("bool_t".into(), ["false_v".to_string(), "true_v".to_string()].into());
    }
    d.push_str("  (:constants");
    for (ty, members) in &constants {
        let list: Vec<&str> = members.iter().map(String::as_str).collect();
        let _ = write!(d, "\n    {} - {ty}", list.join(" "));
    }
    d.push_str(")\n");

    let mut predicates = Vec::new();
    for f in &theory.fluents {
        let mut ps: Vec<String> = f
            .params
            .iter()
            .enumerate()
            .map(|(i, t)| format!("?x{i} - {}", escape(t)))
            .collect();
        ps.push(format!("?v - {}", range_type(&f.range)));
        predicates.push(format!("({}_eq {})", escape(&f.name), ps.join(" ")));
    }
    for s in &theory.statics {
        let ps: Vec<String> = s
            .params
            .iter()
            .enumerate()
            .map(|(i, t)| format!("?x{i} - {}", escape(t)))
            .collect();
        if ps.is_empty() {
            predicates.push(format!("({})", escape(&s.name)));
        } else {
            predicates.push(format!("({} {})", escape(&s.name), ps.join(" ")));
        }
    }
    predicates.sort();
    d.push_str("  (:predicates");
    for p in &predicates {
        let _ = write!(d, "\n    {p}");
    }
    d.push_str(")\n");

    let visible: BTreeSet<&str> = problem.actions.iter().map(|a| a.call.task.as_str()).collect();
    let mut actions: Vec<(String, String)> = Vec::new();
    for task in theory.tasks.iter().filter(|t| visible.contains(t.name.as_str())) {
        if let Some(l) = lift(task, theory) {
            let params: Vec<String> = task
                .params
                .iter()
                .map(|p| format!("?{} - {}", escape(&p.var), escape(&p.ty)))
                .collect();
            let name = escape(&task.name);
            actions.push((name.clone(), render_action(&name, &params.join(" "), &l.pre, &l.eff)));
            continue;
        }
        for a in problem.actions.iter().filter(|a| a.call.task == task.name) {
            let pre: Vec<String> = a.pre.iter().map(|&p| problem_atom(problem, p)).collect();
            let mut eff: Vec<String> = a.add.iter().map(|&p| problem_atom(problem, p)).collect();
            eff.extend(a.del.iter().map(|&p| format!("(not {})", problem_atom(problem, p))));
            let name = ground_action_name(&a.call);
            actions.push((name.clone(), render_action(&name, "", &pre, &eff)));
        }
    }
    actions.sort();
    for (_, text) in &actions {
        d.push_str(text);
    }
    d.push_str(")\n");

    let mut init: Vec<String> = Vec::new();
    for s in &theory.statics {
        for tuple in &s.tuples {
            let mut p = vec![escape(&s.name)];
            p.extend(tuple.iter().map(|a| escape(a)));
            init.push(format!("({})", p.join(" ")));
        }
    }
    init.extend(problem.init.iter().map(|&a| problem_atom(problem, a)));
    init.sort();
    let mut goal: Vec<String> = problem.goal.iter().map(|&a| problem_atom(problem, a)).collect();
    goal.sort();

    let mut p = String::new();
    p.push_str("(define (problem recovery)\n  (:domain adapt)\n  (:init");
    for a in &init {
        let _ = write!(p, "\n    {a}");
    }
    p.push_str(")\n  (:goal (and");
    for g in &goal {
        let _ = write!(p, "\n    {g}");
    }
    p.push_str(")))\n");

    PddlExport { domain: d, problem: p }
}

fn render_action(name: &str, params: &str, pre: &[String], eff: &[String]) -> String {
    format!(
        "  (:action {name}\n    :parameters ({params})\n    :precondition {}\n    :effect {})\n",
        conj(pre),
        conj(eff)
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("plan line {line}: {detail}")]
pub struct PlanParseError {
    pub line: usize,
    pub detail: String,
}

/// Reads a plan written against exported names, one `(action args...)` per
/// line. Case is ignored, `;` starts a comment, and any text around the
/// parenthesized step (such as `0:` step prefixes or `[1]` durations) is
/// skipped.
pub fn parse_plan(text: &str, problem: &PlanningProblem) -> Result<Plan, PlanParseError> {
    let mut steps = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        if content.is_empty() {
            continue;
        }
        let err = |detail: String| PlanParseError { line, detail };
        let (Some(open), Some(close)) = (content.find('('), content.find(')')) else {
            return Err(err(format!("expected a parenthesized step, found {content:?}")));
        };
        let mut words = content[open + 1..close].split_whitespace();
        let name = words.next().ok_or_else(|| err("empty step".into()))?;
        let rest: Vec<&str> = words.collect();
        let mut pieces = name.split("_a");
        let task = pieces.next().unwrap_or_default();
        let mut args: Vec<&str> = pieces.collect();
        if !args.is_empty() && !rest.is_empty() {
            return Err(err(format!("{name} is ground but has parameters")));
        }
        args.extend(rest);
        let decode = |s: &str| unescape(s).ok_or_else(|| err(format!("{s:?} is not an exported name")));
        let call = TaskCall {
            task: decode(task)?,
            args: args.into_iter().map(decode).collect::<Result<_, _>>()?,
        };
        let index = problem
            .action_by_call(&call)
            .ok_or_else(|| err(format!("{call} is not a ground action of the problem")))?;
        steps.push(index);
    }
    Ok(Plan { steps })
}

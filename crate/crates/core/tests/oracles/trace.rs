//! Completed-trace oracle over a two-value domain. One side rewrites
//! process terms directly; the other drives `EngineState::apply` through
//! every interleaving of lifecycle events.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use reflow_core::domain::{evaluate_formula, instantiate_effects, Binding, DomainTheory, FluentTerm, Formula, Reality, Term};
use reflow_core::engine::{EngineState, Event, ItemStatus};
use reflow_core::gateway::OutcomeLabel;
use reflow_core::process::{normalize, validate_process, Process, TaskCall};
use reflow_core::scenario::{parse_scenario, ScenarioDefinition};

pub const DOMAIN: &str = "
seed 1;
types { val: v0 v1; }
fluents { flag(): val; done(val): bool; }
capabilities { work }
services { s1: work; s2: work; s3: work; s4: work; }
tasks {
  set(?v: val) { requires work; effect flag() := ?v; }
  check(?v: val) { requires work; pre flag() = ?v; effect done(?v) := true; }
}
init { flag() = v0; }
process { empty }
";

/// Longest trace either side explores; loops make longer ones possible.
pub const BOUND: usize = 6;

pub type Traces = BTreeSet<Vec<String>>;

pub fn palette() -> Vec<TaskCall> {
    vec![
        TaskCall::new("set", ["v0"]),
        TaskCall::new("set", ["v1"]),
        TaskCall::new("check", ["v1"]),
    ]
}

pub fn conds() -> Vec<Formula> {
    ["v0", "v1"]
        .into_iter()
        .map(|v| Formula::eq(FluentTerm::new("flag", vec![]), Term::object(v)))
        .collect()
}

fn task_count(p: &Process) -> usize {
    p.task_calls().len()
}

/// Every process up to nesting depth 2 with at most four task occurrences.
pub fn processes() -> Vec<Process> {
    let mut level: Vec<Process> = vec![Process::Empty];
    level.extend(palette().into_iter().map(Process::Task));
    let base = level.clone();
    let mut all = level.clone();
    for _ in 0..2 {
        let mut next = base.clone();
        for a in &level {
            for b in &level {
                if task_count(a) + task_count(b) > 4 {
                    continue;
                }
                next.push(Process::Seq(vec![a.clone(), b.clone()]));
                next.push(Process::Par(vec![a.clone(), b.clone()]));
                for c in conds() {
                    next.push(Process::Xor {
                        cond: c,
                        then: Box::new(a.clone()),
                        otherwise: Box::new(b.clone()),
                    });
                }
            }
            for c in conds() {
                next.push(Process::Loop {
                    cond: c,
                    body: Box::new(a.clone()),
                });
            }
        }
        all.extend(next.iter().cloned());
        level = next;
    }
    let mut seen = BTreeSet::new();
    all.retain(|p| seen.insert(format!("{p:?}")));
    all
}

fn holds(t: &DomainTheory, f: &Formula, r: &Reality) -> bool {
    evaluate_formula(f, r, &Binding::new(), t).unwrap()
}

fn enabled(t: &DomainTheory, call: &TaskCall, r: &Reality) -> bool {
    let task = t.task(&call.task).unwrap();
    let b = t.bind(&task.params, &call.args).unwrap();
    evaluate_formula(&task.precondition, r, &b, t).unwrap()
}

fn effect(t: &DomainTheory, call: &TaskCall, r: &Reality) -> Reality {
    let task = t.task(&call.task).unwrap();
    let b = t.bind(&task.params, &call.args).unwrap();
    let mut out = r.clone();
    for a in instantiate_effects(&task.effects, &b).unwrap() {
        out.set(a.target(), a.value);
    }
    out
}

// ---- oracle: rewriting on terms ----

#[derive(Clone, Debug)]
enum Term_ {
    Done,
    Todo(TaskCall),
    Busy(TaskCall),
    Seq(Vec<Term_>),
    Par(Vec<Term_>),
    Lazy(Process),
}

fn lift(p: &Process) -> Term_ {
    match p {
        Process::Empty => Term_::Done,
        Process::Task(c) => Term_::Todo(c.clone()),
        Process::Seq(ps) => Term_::Seq(ps.iter().map(lift).collect()),
        Process::Par(ps) => Term_::Par(ps.iter().map(lift).collect()),
        other => Term_::Lazy(other.clone()),
    }
}

/// Resolves choices and loops that have become reachable, and drops
/// finished parts.
fn settle(t: Term_, th: &DomainTheory, r: &Reality) -> Term_ {
    match t {
        Term_::Lazy(Process::Xor { cond, then, otherwise }) => {
            let chosen = if holds(th, &cond, r) { then } else { otherwise };
            settle(lift(&chosen), th, r)
        }
        Term_::Lazy(p @ Process::Loop { .. }) => {
            let Process::Loop { cond, body } = &p else { unreachable!() };
            if holds(th, cond, r) {
                settle(Term_::Seq(vec![lift(body), Term_::Lazy(p.clone())]), th, r)
            } else {
                Term_::Done
            }
        }
        Term_::Lazy(p) => settle(lift(&p), th, r),
        Term_::Seq(mut ts) => {
            while !ts.is_empty() {
                let head = settle(ts.remove(0), th, r);
                if !matches!(head, Term_::Done) {
                    ts.insert(0, head);
                    return Term_::Seq(ts);
                }
            }
            Term_::Done
        }
        Term_::Par(ts) => {
            let rest: Vec<Term_> = ts
                .into_iter()
                .map(|b| settle(b, th, r))
                .filter(|b| !matches!(b, Term_::Done))
                .collect();
            if rest.is_empty() {
                Term_::Done
            } else {
                Term_::Par(rest)
            }
        }
        other => other,
    }
}

/// Successor configurations: claim a reachable task whose precondition
/// holds, or finish a claimed one (reported as `Some(call)`).
fn moves(t: &Term_, th: &DomainTheory, r: &Reality) -> Vec<(Term_, Option<TaskCall>)> {
    match t {
        Term_::Todo(c) if enabled(th, c, r) => vec![(Term_::Busy(c.clone()), None)],
        Term_::Busy(c) => vec![(Term_::Done, Some(c.clone()))],
        Term_::Seq(ts) => moves(&ts[0], th, r)
            .into_iter()
            .map(|(h, f)| {
                let mut next = ts.clone();
                next[0] = h;
                (Term_::Seq(next), f)
            })
            .collect(),
        Term_::Par(ts) => {
            let mut out = Vec::new();
            for i in 0..ts.len() {
                for (b, f) in moves(&ts[i], th, r) {
                    let mut next = ts.clone();
                    next[i] = b;
                    out.push((Term_::Par(next), f));
                }
            }
            out
        }
        _ => vec![],
    }
}

type Memo = HashMap<String, Rc<Traces>>;

fn extend(out: &mut Traces, head: &TaskCall, tails: &Traces) {
    for t in tails {
        let mut v = Vec::with_capacity(t.len() + 1);
        v.push(head.to_string());
        v.extend(t.iter().cloned());
        out.insert(v);
    }
}

/// Completed traces of at most `budget` finishes from a configuration.
pub fn oracle(p: &Process, th: &DomainTheory) -> Traces {
    fn go(t: Term_, r: Reality, budget: usize, th: &DomainTheory, memo: &mut Memo) -> Rc<Traces> {
        let key = format!("{t:?}|{r:?}|{budget}");
        if let Some(hit) = memo.get(&key) {
            return hit.clone();
        }
        let mut out = Traces::new();
        if matches!(t, Term_::Done) {
            out.insert(Vec::new());
        }
        for (next, finished) in moves(&t, th, &r) {
            match finished {
                None => out.extend(go(next, r.clone(), budget, th, memo).iter().cloned()),
                Some(_) if budget == 0 => {}
                Some(call) => {
                    let r2 = effect(th, &call, &r);
                    let tails = go(settle(next, th, &r2), r2, budget - 1, th, memo);
                    extend(&mut out, &call, &tails);
                }
            }
        }
        let out = Rc::new(out);
        memo.insert(key, out.clone());
        out
    }
    let r = th.initial_reality().unwrap();
    let traces = go(settle(lift(p), th, &r), r, BOUND, th, &mut Memo::new());
    (*traces).clone()
}

// ---- engine side ----

pub fn engine_traces(p: &Process, def: &ScenarioDefinition) -> Traces {
    fn go(st: EngineState, def: &ScenarioDefinition, budget: usize, memo: &mut Memo) -> Rc<Traces> {
        let open: Vec<_> = st.open_items().collect();
        let key = format!("{:?}|{:?}|{open:?}|{budget}", st.remainder, st.exp);
        if let Some(hit) = memo.get(&key) {
            return hit.clone();
        }
        let mut out = Traces::new();
        if st.remainder.is_none() && st.quiescent() {
            out.insert(Vec::new());
        }
        let th = &def.theory;
        let busy = st.busy_services();
        let free = th.services.iter().map(|s| &s.id).find(|s| !busy.contains(*s)).cloned();
        if let Some(service) = free {
            for call in st.enabled_tasks(th).unwrap() {
                let mut next = st.clone();
                let ev = Event::Assign {
                    item: st.next_item,
                    call,
                    service: service.clone(),
                };
                next.apply(&ev, def).unwrap();
                out.extend(go(next, def, budget, memo).iter().cloned());
            }
        }
        for item in &st.items {
            match item.status {
                ItemStatus::Assigned => {
                    let mut next = st.clone();
                    next.apply(&Event::Start { item: item.id }, def).unwrap();
                    out.extend(go(next, def, budget, memo).iter().cloned());
                }
                ItemStatus::Started if budget > 0 => {
                    let task = th.task(&item.call.task).unwrap();
                    let b = th.bind(&task.params, &item.call.args).unwrap();
                    let ev = Event::Finish {
                        item: item.id,
                        outcome: OutcomeLabel::Faithful,
                        observed: instantiate_effects(&task.effects, &b).unwrap(),
                    };
                    let mut next = st.clone();
                    next.apply(&ev, def).unwrap();
                    let tails = go(next, def, budget - 1, memo);
                    extend(&mut out, &item.call, &tails);
                }
                _ => {}
            }
        }
        let out = Rc::new(out);
        memo.insert(key, out.clone());
        out
    }
    let mut def = def.clone();
    def.process = p.clone();
    let st = EngineState::new(&def).unwrap();
    let traces = go(st, &def, BOUND, &mut Memo::new());
    (*traces).clone()
}

/// Checks every enumerated process. Returns the number of processes and
/// distinct normal forms checked, or the first disagreement.
pub fn check_all() -> Result<(usize, usize), String> {
    let def = parse_scenario(DOMAIN).unwrap();
    let th = &def.theory;
    let mut checked = 0;
    // the engine normalizes on load, so one exploration per normal form
    let mut engine_cache: HashMap<Process, Traces> = Default::default();
    for p in processes() {
        if !validate_process(&p, th).is_empty() {
            continue;
        }
        let expected = oracle(&p, th);
        let n = normalize(&p);
        if oracle(&n, th) != expected {
            return Err(format!("normalize changed traces of {p:?}"));
        }
        let got = engine_cache.entry(n.clone()).or_insert_with(|| engine_traces(&n, &def));
        if *got != expected {
            return Err(format!("engine disagrees with the oracle on {p:?}"));
        }
        checked += 1;
    }
    Ok((checked, engine_cache.len()))
}

//! Control-flow terms for processes: task calls composed with sequence,
//! parallel (AND), exclusive choice (XOR) and loops.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{DomainTheory, Formula, Violation, ViolationCode};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskCall {
    pub task: String,
    pub args: Vec<String>,
}

impl TaskCall {
    pub fn new<S: Into<String>>(task: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        TaskCall {
            task: task.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for TaskCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.task, self.args.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Process {
    Empty,
    Task(TaskCall),
    Seq(Vec<Process>),
    Par(Vec<Process>),
    Xor {
        cond: Formula,
        then: Box<Process>,
        otherwise: Box<Process>,
    },
    Loop {
        cond: Formula,
        body: Box<Process>,
    },
}

impl Process {
    pub fn task<S: Into<String>>(name: &str, args: impl IntoIterator<Item = S>) -> Self {
        Process::Task(TaskCall::new(name, args))
    }

    /// Wraps a task call list as a sequence (used for recovery plans).
    pub fn from_calls(calls: impl IntoIterator<Item = TaskCall>) -> Self {
        Process::Seq(calls.into_iter().map(Process::Task).collect())
    }

    /// True when the term can complete without running any task, i.e. it
    /// normalizes to `Empty`.
    pub fn is_empty_equivalent(&self) -> bool {
        match self {
            Process::Empty => true,
            Process::Task(_) | Process::Xor { .. } | Process::Loop { .. } => false,
            Process::Seq(ps) | Process::Par(ps) => ps.iter().all(Process::is_empty_equivalent),
        }
    }

    /// Task calls in left-to-right order.
    pub fn task_calls(&self) -> Vec<&TaskCall> {
        let mut out = Vec::new();
        self.collect_calls(&mut out);
        out
    }

    fn collect_calls<'a>(&'a self, out: &mut Vec<&'a TaskCall>) {
        match self {
            Process::Empty => {}
            Process::Task(c) => out.push(c),
            Process::Seq(ps) | Process::Par(ps) => ps.iter().for_each(|p| p.collect_calls(out)),
            Process::Xor { then, otherwise, .. } => {
                then.collect_calls(out);
                otherwise.collect_calls(out);
            }
            Process::Loop { body, .. } => body.collect_calls(out),
        }
    }

    /// Lower bound on the number of tasks any completed run of this term executes.
    pub fn min_tasks(&self) -> usize {
        match self {
            Process::Empty | Process::Loop { .. } => 0,
            Process::Task(_) => 1,
            Process::Seq(ps) | Process::Par(ps) => ps.iter().map(Process::min_tasks).sum(),
            Process::Xor { then, otherwise, .. } => then.min_tasks().min(otherwise.min_tasks()),
        }
    }
}

/// Flattens nested sequences, drops `Empty` from sequence and parallel
/// lists and collapses singleton lists. Idempotent.
pub fn normalize(p: &Process) -> Process {
    match p {
        Process::Empty | Process::Task(_) => p.clone(),
        Process::Seq(ps) => {
            let mut items = Vec::with_capacity(ps.len());
            for q in ps {
                match normalize(q) {
                    Process::Empty => {}
                    Process::Seq(inner) => items.extend(inner),
                    other => items.push(other),
                }
            }
            collapse(items, Process::Seq)
        }
        Process::Par(ps) => {
            let items: Vec<Process> = ps
                .iter()
                .map(normalize)
                .filter(|q| *q != Process::Empty)
                .collect();
            collapse(items, Process::Par)
        }
        Process::Xor { cond, then, otherwise } => Process::Xor {
            cond: cond.clone(),
            then: Box::new(normalize(then)),
            otherwise: Box::new(normalize(otherwise)),
        },
        Process::Loop { cond, body } => Process::Loop {
            cond: cond.clone(),
            body: Box::new(normalize(body)),
        },
    }
}

fn collapse(mut items: Vec<Process>, wrap: fn(Vec<Process>) -> Process) -> Process {
    match items.len() {
        0 => Process::Empty,
        1 => items.pop().unwrap(),
        _ => wrap(items),
    }
}

/// Resolves task calls against the theory and checks gateway conditions.
pub fn validate_process(p: &Process, theory: &DomainTheory) -> Vec<Violation> {
    let mut out = Vec::new();
    check(p, theory, &mut out);
    out
}

fn check(p: &Process, theory: &DomainTheory, out: &mut Vec<Violation>) {
    match p {
        Process::Empty => {}
        Process::Task(call) => check_call(call, theory, out),
        Process::Seq(ps) | Process::Par(ps) => ps.iter().for_each(|q| check(q, theory, out)),
        Process::Xor { cond, then, otherwise } => {
            check_condition(cond, theory, out);
            check(then, theory, out);
            check(otherwise, theory, out);
        }
        Process::Loop { cond, body } => {
            check_condition(cond, theory, out);
            if body.min_tasks() == 0 {
                out.push(Violation::new(
                    ViolationCode::InvalidProcess,
                    "process",
                    "loop body may complete an iteration without running a task",
                ));
            }
            check(body, theory, out);
        }
    }
}

pub(crate) fn check_call(call: &TaskCall, theory: &DomainTheory, out: &mut Vec<Violation>) {
    let subject = format!("call {call}");
    let Some(task) = theory.task(&call.task) else {
        out.push(Violation::new(
            ViolationCode::UnknownTask,
            subject,
            format!("unknown task {}", call.task),
        ));
        return;
    };
    if task.params.len() != call.args.len() {
        out.push(Violation::new(
            ViolationCode::ArityMismatch,
            subject,
            format!("{} takes {} arguments, got {}", task.name, task.params.len(), call.args.len()),
        ));
        return;
    }
    for (p, a) in task.params.iter().zip(&call.args) {
        if !theory.is_member(&p.ty, a) {
            out.push(Violation::new(
                ViolationCode::NonMember,
                subject.clone(),
                format!("{a} is not a member of {}", p.ty),
            ));
        }
    }
}

fn check_condition(cond: &Formula, theory: &DomainTheory, out: &mut Vec<Violation>) {
    let free = cond.free_vars();
    if !free.is_empty() {
        out.push(Violation::new(
            ViolationCode::UnboundVariable,
            "process condition",
            format!("condition has free variables: ?{}", free.join(", ?")),
        ));
        return;
    }
    out.extend(crate::domain::check_formula(theory, "process condition", cond));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FluentTerm, Term};

    fn t(name: &str) -> Process {
        Process::task::<&str>(name, [])
    }

    #[test]
    fn unit_law() {
        assert_eq!(normalize(&Process::Seq(vec![Process::Empty, t("t1")])), t("t1"));
    }

    #[test]
    fn associativity() {
        let p = Process::Seq(vec![Process::Seq(vec![t("t1"), t("t2")]), t("t3")]);
        assert_eq!(normalize(&p), Process::Seq(vec![t("t1"), t("t2"), t("t3")]));
    }

    #[test]
    fn parallel_drops_empty_and_collapses() {
        let p = Process::Par(vec![Process::Empty, Process::Seq(vec![]), t("a")]);
        assert_eq!(normalize(&p), t("a"));
        assert_eq!(normalize(&Process::Par(vec![])), Process::Empty);
    }

    #[test]
    fn normalizes_inside_gateways() {
        let cond = Formula::True;
        let p = Process::Loop {
            cond: cond.clone(),
            body: Box::new(Process::Seq(vec![t("a"), Process::Empty])),
        };
        assert_eq!(
            normalize(&p),
            Process::Loop {
                cond,
                body: Box::new(t("a"))
            }
        );
    }

    #[test]
    fn unknown_task_is_reported() {
        let theory = crate::fixtures::rescue_grid_theory();
        let v = validate_process(&Process::task("fly", ["rbt1"]), &theory);
        assert_eq!(v[0].code, ViolationCode::UnknownTask);
        assert!(v[0].detail.contains("fly"));
    }

    #[test]
    fn loop_body_must_progress() {
        let theory = crate::fixtures::rescue_grid_theory();
        let p = Process::Loop {
            cond: Formula::True,
            body: Box::new(Process::Xor {
                cond: Formula::True,
                then: Box::new(Process::task("takephoto", ["rbt1", "loc_0_0"])),
                otherwise: Box::new(Process::Empty),
            }),
        };
        let v = validate_process(&p, &theory);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::InvalidProcess);
    }

    #[test]
    fn conditions_must_be_closed() {
        let theory = crate::fixtures::rescue_grid_theory();
        let cond = Formula::eq(FluentTerm::new("at", vec![Term::var("r")]), Term::object("loc_0_0"));
        let p = Process::Xor {
            cond,
            then: Box::new(Process::Empty),
            otherwise: Box::new(Process::Empty),
        };
        assert_eq!(validate_process(&p, &theory)[0].code, ViolationCode::UnboundVariable);
    }
}

//! Runtime form of the remaining process. Gateways and loops are resolved
//! against EXP as soon as they reach the frontier ("settling"); everything
//! behind the frontier stays a plain [`Process`].

use serde::{Deserialize, Serialize};

use crate::domain::{evaluate_formula, Binding, DomainError, DomainTheory, Reality};
use crate::process::{Process, TaskCall};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// A frontier task, claimed by a work item once assigned.
    Task { call: TaskCall, item: Option<u64> },
    /// `head` is settled, `rest` runs after it.
    Seq { head: Box<Node>, rest: Vec<Process> },
    /// Every branch is settled and unfinished.
    Par(Vec<Node>),
}

/// Settles `p` against `exp`. `None` means the term completes without
/// running any task.
pub fn settle(p: &Process, exp: &Reality, theory: &DomainTheory) -> Result<Option<Node>, DomainError> {
    Ok(match p {
        Process::Empty => None,
        Process::Task(call) => Some(Node::Task {
            call: call.clone(),
            item: None,
        }),
        Process::Seq(ps) => settle_seq(ps, exp, theory)?,
        Process::Par(ps) => {
            let mut branches = Vec::new();
            for q in ps {
                if let Some(n) = settle(q, exp, theory)? {
                    branches.push(n);
                }
            }
            match branches.len() {
                0 => None,
                1 => branches.pop(),
                _ => Some(Node::Par(branches)),
            }
        }
        Process::Xor { cond, then, otherwise } => {
            if evaluate_formula(cond, exp, &Binding::new(), theory)? {
                settle(then, exp, theory)?
            } else {
                settle(otherwise, exp, theory)?
            }
        }
        Process::Loop { cond, body } => {
            if evaluate_formula(cond, exp, &Binding::new(), theory)? {
                settle_seq(&[(**body).clone(), p.clone()], exp, theory)?
            } else {
                None
            }
        }
    })
}

fn settle_seq(ps: &[Process], exp: &Reality, theory: &DomainTheory) -> Result<Option<Node>, DomainError> {
    for (i, q) in ps.iter().enumerate() {
        if let Some(head) = settle(q, exp, theory)? {
            let rest = ps[i + 1..].to_vec();
            return Ok(Some(if rest.is_empty() {
                head
            } else {
                Node::Seq {
                    head: Box::new(head),
                    rest,
                }
            }));
        }
    }
    Ok(None)
}

impl Node {
    /// Frontier tasks in left-to-right order, with their claiming item.
    pub fn frontier(&self) -> Vec<(&TaskCall, Option<u64>)> {
        let mut out = Vec::new();
        self.collect_frontier(&mut out);
        out
    }

    fn collect_frontier<'a>(&'a self, out: &mut Vec<(&'a TaskCall, Option<u64>)>) {
        match self {
            Node::Task { call, item } => out.push((call, *item)),
            Node::Seq { head, .. } => head.collect_frontier(out),
            Node::Par(bs) => bs.iter().for_each(|b| b.collect_frontier(out)),
        }
    }

    /// Claims the first unclaimed frontier occurrence of `call`.
    pub fn claim(&mut self, call: &TaskCall, id: u64) -> bool {
        match self {
            Node::Task { call: c, item } if c == call && item.is_none() => {
                *item = Some(id);
                true
            }
            Node::Task { .. } => false,
            Node::Seq { head, .. } => head.claim(call, id),
            Node::Par(bs) => bs.iter_mut().any(|b| b.claim(call, id)),
        }
    }

    fn holds(&self, id: u64) -> bool {
        match self {
            Node::Task { item, .. } => *item == Some(id),
            Node::Seq { head, .. } => head.holds(id),
            Node::Par(bs) => bs.iter().any(|b| b.holds(id)),
        }
    }

    /// Removes the task claimed by `id` and settles whatever becomes the
    /// new frontier behind it.
    pub fn complete(self, id: u64, exp: &Reality, theory: &DomainTheory) -> Result<Option<Node>, DomainError> {
        match self {
            Node::Task { item, .. } if item == Some(id) => Ok(None),
            Node::Task { .. } => Ok(Some(self)),
            Node::Seq { head, rest } => {
                if !head.holds(id) {
                    return Ok(Some(Node::Seq { head, rest }));
                }
                match head.complete(id, exp, theory)? {
                    Some(h) => Ok(Some(Node::Seq { head: Box::new(h), rest })),
                    None => settle_seq(&rest, exp, theory),
                }
            }
            Node::Par(bs) => {
                let mut out = Vec::with_capacity(bs.len());
                for b in bs {
                    if b.holds(id) {
                        if let Some(n) = b.complete(id, exp, theory)? {
                            out.push(n);
                        }
                    } else {
                        out.push(b);
                    }
                }
                Ok(match out.len() {
                    0 => None,
                    1 => out.pop(),
                    _ => Some(Node::Par(out)),
                })
            }
        }
    }

    pub fn to_process(&self) -> Process {
        match self {
            Node::Task { call, .. } => Process::Task(call.clone()),
            Node::Seq { head, rest } => {
                let mut items = vec![head.to_process()];
                items.extend(rest.iter().cloned());
                Process::Seq(items)
            }
            Node::Par(bs) => Process::Par(bs.iter().map(Node::to_process).collect()),
        }
    }
}

/// The process view of an optional remainder.
pub fn remainder_process(node: &Option<Node>) -> Process {
    node.as_ref().map_or(Process::Empty, Node::to_process)
}

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use super::{HAdd, Plan, PlanningProblem};
use crate::scenario::DEFAULT_NODE_LIMIT;

#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Expansion cap; exceeding it reports `RESOURCE_LIMIT`.
    pub node_limit: u64,
    /// Checked once per expansion.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            node_limit: DEFAULT_NODE_LIMIT,
            cancel: None,
        }
    }
}

impl SearchConfig {
    pub fn with_limit(node_limit: u64) -> Self {
        SearchConfig {
            node_limit,
            cancel: None,
        }
    }

    fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: u64,
    pub generated: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("NO_PLAN: search space exhausted after {} expansions", .0.expanded)]
    NoPlan(SearchStats),
    #[error("RESOURCE_LIMIT: gave up after {} expansions", .0.expanded)]
    ResourceLimit(SearchStats),
    #[error("search cancelled")]
    Cancelled,
}

impl SearchError {
    pub fn code(&self) -> &'static str {
        match self {
            SearchError::NoPlan(_) => "NO_PLAN",
            SearchError::ResourceLimit(_) => "RESOURCE_LIMIT",
            SearchError::Cancelled => "CANCELLED",
        }
    }
}

type State = Box<[u32]>;

struct Node {
    parent: u32,
    action: u32,
    depth: u32,
}

const ROOT: u32 = u32::MAX;

/// Search graph shared by both strategies: interned states plus parent links.
struct Graph {
    states: Vec<State>,
    nodes: Vec<Node>,
    seen: HashMap<State, u32>,
}

impl Graph {
    fn new(init: State) -> Self {
        let mut seen = HashMap::new();
        seen.insert(init.clone(), 0);
        Graph {
            states: vec![init],
            nodes: vec![Node { parent: ROOT, action: 0, depth: 0 }],
            seen,
        }
    }

    /// Returns the new node id, or `None` for a duplicate.
    fn add(&mut self, state: State, parent: u32, action: usize) -> Option<u32> {
        if self.seen.contains_key(&state) {
            return None;
        }
        let id = self.states.len() as u32;
        self.seen.insert(state.clone(), id);
        self.states.push(state);
        let depth = self.nodes[parent as usize].depth + 1;
        self.nodes.push(Node { parent, action: action as u32, depth });
        Some(id)
    }

    fn plan(&self, mut id: u32) -> Plan {
        let mut steps = Vec::new();
        while self.nodes[id as usize].parent != ROOT {
            steps.push(self.nodes[id as usize].action as usize);
            id = self.nodes[id as usize].parent;
        }
        steps.reverse();
        Plan { steps }
    }
}

fn initial(problem: &PlanningProblem) -> State {
    problem.init_state().into_iter().map(|a| a as u32).collect()
}

fn is_goal(problem: &PlanningProblem, s: &[u32]) -> bool {
    problem.goal.iter().all(|&g| s[problem.var_of[g]] as usize == g)
}

fn successors<'a>(problem: &'a PlanningProblem, s: &'a [u32]) -> impl Iterator<Item = (usize, State)> + 'a {
    problem.actions.iter().enumerate().filter_map(move |(i, a)| {
        if !a.pre.iter().all(|&p| s[problem.var_of[p]] as usize == p) {
            return None;
        }
        let mut next: State = s.into();
        for &q in &a.add {
            next[problem.var_of[q]] = q as u32;
        }
        Some((i, next))
    })
}

fn atoms(s: &[u32]) -> Vec<usize> {
    s.iter().map(|&a| a as usize).collect()
}

/// Greedy best-first search on h_add with duplicate elimination. Open-list
/// ties go to the shallower node, then to the earlier insertion.
pub fn search_gbfs(problem: &PlanningProblem, config: &SearchConfig) -> Result<(Plan, SearchStats), SearchError> {
    let heuristic = HAdd::new(problem);
    let init = initial(problem);
    let mut stats = SearchStats::default();
    let Some(h0) = heuristic.eval(&atoms(&init)) else {
        return Err(SearchError::NoPlan(stats));
    };
    let mut graph = Graph::new(init);
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    open.push(Reverse((h0, 0u32, seq, 0u32)));
    while let Some(Reverse((_, _, _, id))) = open.pop() {
        if config.cancelled() {
            return Err(SearchError::Cancelled);
        }
        if is_goal(problem, &graph.states[id as usize]) {
            return Ok((graph.plan(id), stats));
        }
        if stats.expanded >= config.node_limit {
            return Err(SearchError::ResourceLimit(stats));
        }
        stats.expanded += 1;
        let state = graph.states[id as usize].clone();
        for (action, next) in successors(problem, &state) {
            stats.generated += 1;
            let Some(child) = graph.add(next, id, action) else { continue };
            // Dead ends (infinite estimate) stay marked as seen but never enter the open list.
            if let Some(h) = heuristic.eval(&atoms(&graph.states[child as usize])) {
                seq += 1;
                open.push(Reverse((h, graph.nodes[child as usize].depth, seq, child)));
            }
        }
    }
    Err(SearchError::NoPlan(stats))
}

/// Uniform-cost search. With unit costs this is breadth-first search with
/// the goal test at expansion, so the returned plan has minimum length.
pub fn search_ucs(problem: &PlanningProblem, config: &SearchConfig) -> Result<(Plan, SearchStats), SearchError> {
    let mut graph = Graph::new(initial(problem));
    let mut open = VecDeque::from([0u32]);
    let mut stats = SearchStats::default();
    while let Some(id) = open.pop_front() {
        if config.cancelled() {
            return Err(SearchError::Cancelled);
        }
        if is_goal(problem, &graph.states[id as usize]) {
            return Ok((graph.plan(id), stats));
        }
        if stats.expanded >= config.node_limit {
            return Err(SearchError::ResourceLimit(stats));
        }
        stats.expanded += 1;
        let state = graph.states[id as usize].clone();
        for (action, next) in successors(problem, &state) {
            stats.generated += 1;
            if let Some(child) = graph.add(next, id, action) {
                open.push_back(child);
            }
        }
    }
    Err(SearchError::NoPlan(stats))
}

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{AtomId, PlanningProblem};

const INF: u64 = u64::MAX;

/// Additive delete-relaxation heuristic, computed with a generalized
/// Dijkstra over precondition counters.
pub struct HAdd<'a> {
    problem: &'a PlanningProblem,
    /// Actions that list the atom as a precondition.
    watchers: Vec<Vec<u32>>,
    /// Actions without preconditions.
    free: Vec<u32>,
    goal_mask: Vec<bool>,
}

impl<'a> HAdd<'a> {
    pub fn new(problem: &'a PlanningProblem) -> Self {
        let mut watchers = vec![Vec::new(); problem.atoms.len()];
        let mut free = Vec::new();
        for (i, a) in problem.actions.iter().enumerate() {
            if a.pre.is_empty() {
                free.push(i as u32);
            }
            for &p in &a.pre {
                watchers[p].push(i as u32);
            }
        }
        let mut goal_mask = vec![false; problem.atoms.len()];
        for &g in &problem.goal {
            goal_mask[g] = true;
        }
        HAdd {
            problem,
            watchers,
            free,
            goal_mask,
        }
    }

    /// `None` stands for an infinite estimate.
    pub fn eval(&self, state: &[AtomId]) -> Option<u64> {
        let p = self.problem;
        if p.goal.is_empty() {
            return Some(0);
        }
        let mut cost = vec![INF; p.atoms.len()];
        let mut done = vec![false; p.atoms.len()];
        let mut remaining: Vec<u32> = p.actions.iter().map(|a| a.pre.len() as u32).collect();
        let mut acc = vec![0u64; p.actions.len()];
        let mut heap = BinaryHeap::new();
        for &a in state {
            cost[a] = 0;
            heap.push(Reverse((0u64, a)));
        }
        let relax = |i: usize, acc: u64, cost: &mut Vec<u64>, heap: &mut BinaryHeap<Reverse<(u64, AtomId)>>| {
            let c = acc.saturating_add(p.actions[i].cost());
            for &q in &p.actions[i].add {
                if c < cost[q] {
                    cost[q] = c;
                    heap.push(Reverse((c, q)));
                }
            }
        };
        for &i in &self.free {
            relax(i as usize, 0, &mut cost, &mut heap);
        }
        let mut open_goals = p.goal.len();
        while let Some(Reverse((c, a))) = heap.pop() {
            if done[a] || c > cost[a] {
                continue;
            }
            done[a] = true;
            if self.goal_mask[a] {
                open_goals -= 1;
                if open_goals == 0 {
                    break;
                }
            }
            for &i in &self.watchers[a] {
                let i = i as usize;
                remaining[i] -= 1;
                acc[i] = acc[i].saturating_add(c);
                if remaining[i] == 0 {
                    relax(i, acc[i], &mut cost, &mut heap);
                }
            }
        }
        let mut total = 0u64;
        for &g in &p.goal {
            if cost[g] == INF {
                return None;
            }
            total += cost[g];
        }
        Some(total)
    }
}

/// h_add of `state` (atoms that hold) towards the problem goal.
pub fn h_add(problem: &PlanningProblem, state: &[AtomId]) -> Option<u64> {
    HAdd::new(problem).eval(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GroundFluent, Value};
    use crate::fixtures;
    use crate::planner::ground;

    fn grid_problem(from: &str, to: &str) -> PlanningProblem {
        let theory = fixtures::rescue_grid_theory();
        let mut phy = theory.initial_reality().unwrap();
        phy.set(GroundFluent::new("at", ["rbt1"]), Value::object(from));
        let mut exp = phy.clone();
        exp.set(GroundFluent::new("at", ["rbt1"]), Value::object(to));
        ground(&theory, &phy, &exp).unwrap()
    }

    #[test]
    fn zero_on_goal_states() {
        let p = grid_problem("loc_0_0", "loc_0_0");
        assert_eq!(h_add(&p, &p.init), Some(0));
    }

    #[test]
    fn one_step() {
        let p = grid_problem("loc_0_0", "loc_0_1");
        assert_eq!(h_add(&p, &p.init), Some(1));
    }

    #[test]
    fn three_moves_along_a_row() {
        let p = grid_problem("loc_0_0", "loc_0_3");
        assert_eq!(h_add(&p, &p.init), Some(3));
    }

    #[test]
    fn unreachable_is_infinite() {
        // Edges only run right and down.
        let p = grid_problem("loc_3_3", "loc_0_0");
        assert_eq!(h_add(&p, &p.init), None);
    }
}

//! Planner checked against oracles that work on realities through the
//! domain layer instead of on grounded atoms.

mod oracles;

use std::collections::BTreeSet;

use oracles::bfs::{every_call, execute, optimum, reaches, step};
use reflow_core::fixtures::random_grid_problem;
use reflow_core::planner::{
    ground, h_add, search_gbfs, search_ucs, validate_plan, Plan, PlanDiagnostic, PlanningProblem, SearchConfig,
    SearchError,
};
use reflow_core::process::TaskCall;

const PROBLEMS: u64 = 200;

#[test]
fn gbfs_and_ucs_agree_with_breadth_first_search() {
    let config = SearchConfig::default();
    let (mut solvable, mut within_ratio) = (0usize, 0usize);
    for seed in 0..PROBLEMS {
        let p = random_grid_problem(seed);
        let problem = ground(&p.theory, &p.phy, &p.exp).unwrap();
        // the oracle uses every type-correct call, not just grounded ones
        let (optimum, reachable) = optimum(&p.theory, &p.phy, &p.exp);
        assert!(reachable <= 100_000, "seed {seed}: {reachable} states");
        let gbfs = search_gbfs(&problem, &config);
        let ucs = search_ucs(&problem, &config);
        match optimum {
            None => {
                assert!(matches!(gbfs, Err(SearchError::NoPlan(_))), "seed {seed}: gbfs {gbfs:?}");
                assert!(matches!(ucs, Err(SearchError::NoPlan(_))), "seed {seed}: ucs {ucs:?}");
            }
            Some(opt) => {
                solvable += 1;
                let (g, _) = gbfs.unwrap_or_else(|e| panic!("seed {seed}: gbfs failed: {e}"));
                let (u, _) = ucs.unwrap_or_else(|e| panic!("seed {seed}: ucs failed: {e}"));
                assert_eq!(u.len(), opt, "seed {seed}: ucs is not optimal");
                for plan in [&g, &u] {
                    validate_plan(&problem, plan).unwrap_or_else(|d| panic!("seed {seed}: {d}"));
                    let end = execute(&p.theory, &p.phy, &plan.calls(&problem)).expect("plan executes on realities");
                    assert!(reaches(&p.theory, &end, &p.exp), "seed {seed}: plan misses the goal");
                }
                if g.len() <= 3 * opt {
                    within_ratio += 1;
                }
            }
        }
    }
    assert!(solvable > PROBLEMS as usize / 4, "only {solvable} solvable problems");
    assert!(
        within_ratio * 100 >= solvable * 95,
        "gbfs within 3x optimum on {within_ratio}/{solvable}"
    );
}

#[test]
fn grounding_matches_domain_semantics() {
    for seed in 0..40 {
        let p = random_grid_problem(seed);
        let problem = ground(&p.theory, &p.phy, &p.exp).unwrap();
        let grounded: BTreeSet<&TaskCall> = problem.actions.iter().map(|a| &a.call).collect();
        // walk a few reachable states and compare applicability both ways
        let mut r = p.phy.clone();
        let mut state = problem.init_state();
        for k in 0..12 {
            let from_domain: BTreeSet<TaskCall> = every_call(&p.theory)
                .into_iter()
                .filter(|c| step(&p.theory, &r, c).is_some())
                .collect();
            let from_atoms: BTreeSet<TaskCall> = problem
                .actions
                .iter()
                .filter(|a| problem.applicable(a, &state))
                .map(|a| a.call.clone())
                .collect();
            assert_eq!(from_domain, from_atoms, "seed {seed}, step {k}");
            for c in &from_domain {
                assert!(grounded.contains(c));
            }
            let Some(pick) = from_domain.iter().nth((seed as usize + k) % from_domain.len().max(1)) else { break };
            let a = &problem.actions[problem.action_by_call(pick).unwrap()];
            r = step(&p.theory, &r, pick).unwrap();
            state = problem.apply(a, &state);
            for (inst, v) in r.iter() {
                let var = problem.instances.iter().position(|i| i == inst).unwrap();
                assert_eq!(problem.atoms[state[var]].value, *v, "seed {seed}: {inst}");
            }
        }
    }
}

/// Relaxed reachability without deletes, by plain fixpoint.
fn relaxed_reachable(problem: &PlanningProblem, state: &[usize]) -> bool {
    let mut have: BTreeSet<usize> = state.iter().copied().collect();
    loop {
        let before = have.len();
        for a in &problem.actions {
            if a.pre.iter().all(|p| have.contains(p)) {
                have.extend(a.add.iter().copied());
            }
        }
        if have.len() == before {
            break;
        }
    }
    problem.goal.iter().all(|g| have.contains(g))
}

#[test]
fn additive_heuristic_properties() {
    for seed in 0..PROBLEMS {
        let p = random_grid_problem(seed);
        let problem = ground(&p.theory, &p.phy, &p.exp).unwrap();
        let init = problem.init_state();
        let h = h_add(&problem, &init);
        assert_eq!(h.is_some(), relaxed_reachable(&problem, &init), "seed {seed}");
        assert_eq!(h == Some(0), problem.is_goal(&init), "seed {seed}");
        if let Some(h) = h {
            // every goal atom that does not hold needs at least one action
            let unmet = problem.goal.iter().filter(|&&g| init[problem.var_of[g]] != g).count() as u64;
            assert!(h >= unmet.min(1), "seed {seed}");
        }
        if h.is_none() {
            assert!(matches!(search_ucs(&problem, &SearchConfig::default()), Err(SearchError::NoPlan(_))));
        }
    }
}

#[test]
fn validate_plan_reports_the_first_problem() {
    let p = random_grid_problem(5);
    let problem = ground(&p.theory, &p.phy, &p.exp).unwrap();
    let bogus = Plan {
        steps: vec![problem.actions.len() + 3],
    };
    assert!(matches!(
        validate_plan(&problem, &bogus),
        Err(PlanDiagnostic::UnknownAction { step: 1, .. })
    ));
    let blocked = problem
        .actions
        .iter()
        .position(|a| !problem.applicable(a, &problem.init_state()))
        .expect("some action is blocked initially");
    assert!(matches!(
        validate_plan(&problem, &Plan { steps: vec![blocked] }),
        Err(PlanDiagnostic::PreconditionFailed { step: 1, .. })
    ));
}

//! Exported PDDL for the rescue-grid gap after the first move fails.
//! Set `REFLOW_BLESS=1` to rewrite the golden files.

use std::path::PathBuf;

use reflow_core::engine::Mode;
use reflow_core::fixtures::RESCUE_GRID_DIVERGENT;
use reflow_core::planner::{export_pddl, ground, parse_plan, search_ucs, validate_plan, PlanningProblem, SearchConfig};
use reflow_core::process::TaskCall;
use reflow_core::scenario::parse_scenario;
use reflow_core::{DomainTheory, Engine};

fn gap() -> (PlanningProblem, DomainTheory) {
    let def = parse_scenario(RESCUE_GRID_DIVERGENT).unwrap();
    let theory = def.theory.clone();
    let mut e = Engine::in_memory(def).unwrap();
    e.assign(&TaskCall::new("move", ["rbt1", "loc_0_0", "loc_0_1"])).unwrap();
    e.start_item(0).unwrap();
    e.finish_simulated(0).unwrap();
    assert_eq!(e.mode(), Mode::Adapting);
    let st = e.state();
    (ground(&theory, &st.phy, &st.exp).unwrap(), theory)
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn check(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("REFLOW_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the golden file:\n{actual}");
}

#[test]
fn export_matches_golden_files() {
    let (problem, theory) = gap();
    let out = export_pddl(&problem, &theory);
    check("rescue_gap_domain.pddl", &out.domain);
    check("rescue_gap_problem.pddl", &out.problem);
    // stable across exports
    assert_eq!(export_pddl(&problem, &theory), out);
}

#[test]
fn external_plan_validates() {
    let (problem, _) = gap();
    // as an external planner would print it
    let text = "; optimal plan\n0: (MOVE RBT1 LOC_U0_U0 LOC_U0_U1) [1]\n";
    let plan = parse_plan(text, &problem).unwrap();
    validate_plan(&problem, &plan).unwrap();
    let (ucs, _) = search_ucs(&problem, &SearchConfig::default()).unwrap();
    assert_eq!(ucs.len(), plan.len());
    assert_eq!(plan.calls(&problem), vec![TaskCall::new("move", ["rbt1", "loc_0_0", "loc_0_1"])]);
}

#[test]
fn unknown_plan_steps_are_reported() {
    let (problem, _) = gap();
    let err = parse_plan("(move rbt1 loc_u0_u0 loc_u9_u9)", &problem).unwrap_err();
    assert_eq!(err.line, 1);
    assert!(parse_plan("(fly rbt1)", &problem).is_err());
}

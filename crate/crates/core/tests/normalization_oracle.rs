//! Completed-trace equivalence on every small process over a two-value
//! domain: normalizing must not change the oracle's answer, and the engine
//! must agree with it.

mod oracles;

use oracles::trace::{check_all, oracle, DOMAIN};
use reflow_core::process::Process;
use reflow_core::scenario::parse_scenario;

#[test]
fn normalize_preserves_completed_traces() {
    let (checked, forms) = check_all().unwrap_or_else(|e| panic!("{e}"));
    assert!(checked > 1000, "only {checked} processes checked");
    eprintln!("{checked} processes, {forms} normal forms");
}

#[test]
fn oracle_sees_interleavings() {
    let def = parse_scenario(DOMAIN).unwrap();
    let p = Process::Par(vec![Process::task("set", ["v1"]), Process::task("check", ["v1"])]);
    // check(v1) can only be claimed after set(v1) finished
    let traces = oracle(&p, &def.theory);
    assert_eq!(traces, [vec!["set(v1)".to_string(), "check(v1)".to_string()]].into());
}

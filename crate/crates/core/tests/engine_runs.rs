use std::collections::BTreeSet;

use proptest::prelude::*;

use reflow_core::domain::{GroundFluent, Reality, Value};
use reflow_core::engine::{Event, EventRecord, Mode};
use reflow_core::fixtures::{self, GridSpec, FIXTURES};
use reflow_core::log::{parse_log, replay, FileSink, MemorySink};
use reflow_core::process::{Process, TaskCall};
use reflow_core::runner::{run_auto, EventScript, RunStatus};
use reflow_core::scenario::{parse_events_script, parse_scenario, ScenarioDefinition};
use reflow_core::Engine;

fn run(def: ScenarioDefinition, events: Option<&str>) -> (Engine, RunStatus) {
    let events = events.map(|e| parse_events_script(e).unwrap()).unwrap_or_default();
    let mut engine = Engine::in_memory(def).unwrap();
    let status = run_auto(&mut engine, &mut EventScript::new(events)).unwrap();
    (engine, status)
}

fn cell(r: usize, c: usize) -> String {
    format!("loc_{r}_{c}")
}

/// A random walk of rbt1 with a photo at every target it passes, split
/// into a sequence of steps.
fn walk_scenario(rows: usize, cols: usize, moves: &[u8], targets: &[(usize, usize)]) -> ScenarioDefinition {
    let spec = GridSpec {
        rows,
        cols,
        robots: vec![(0, 0)],
        targets: targets.to_vec(),
        walls: BTreeSet::new(),
    };
    let mut def = parse_scenario(&spec.scenario_text()).unwrap();
    let (mut r, mut c) = (0usize, 0usize);
    let mut steps = Vec::new();
    for m in moves {
        let (nr, nc) = match m % 4 {
            0 if r + 1 < rows => (r + 1, c),
            1 if c + 1 < cols => (r, c + 1),
            2 if r > 0 => (r - 1, c),
            3 if c > 0 => (r, c - 1),
            _ => continue,
        };
        steps.push(Process::task("move", ["rbt1".to_string(), cell(r, c), cell(nr, nc)]));
        (r, c) = (nr, nc);
        if targets.contains(&(r, c)) {
            steps.push(Process::task("takephoto", ["rbt1".to_string(), cell(r, c)]));
        }
    }
    def.process = Process::Seq(steps);
    def
}

/// Instances an event may touch.
fn touched(ev: &Event) -> BTreeSet<GroundFluent> {
    match ev {
        Event::Finish { observed, .. } => observed.iter().map(|a| a.target()).collect(),
        _ => BTreeSet::new(),
    }
}

fn realities_after_each_record(def: &ScenarioDefinition, log: &[EventRecord]) -> Vec<(Reality, Reality)> {
    (1..=log.len())
        .map(|n| {
            let e = replay(def, &log[..n]).unwrap();
            (e.state().exp.clone(), e.state().phy.clone())
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn faithful_runs_never_diverge(
        rows in 2usize..5,
        cols in 2usize..5,
        moves in prop::collection::vec(any::<u8>(), 1..8),
        targets in prop::collection::vec((0usize..4, 0usize..4), 0..3),
    ) {
        let targets: Vec<_> = targets.into_iter().filter(|&(r, c)| r < rows && c < cols).collect();
        let def = walk_scenario(rows, cols, &moves, &targets);
        let (engine, status) = run(def.clone(), None);
        prop_assert_eq!(status, RunStatus::Completed);
        let log = engine.log();
        let states = realities_after_each_record(&def, log);
        let mut prev_phy = states[0].1.clone();
        for (record, (exp, phy)) in log.iter().zip(&states) {
            prop_assert_eq!(exp, phy, "diverged at record {}", record.sequence);
            // frame: only instances named by the outcome may change
            let changed: BTreeSet<GroundFluent> = prev_phy.diff(phy).into_iter().collect();
            prop_assert!(changed.is_subset(&touched(&record.event)));
            prev_phy = phy.clone();
        }
        // lifecycle: ASSIGN < START < FINISH exactly once per item
        let mut seen: Vec<Vec<&str>> = vec![Vec::new(); engine.state().items.len()];
        for r in log {
            match &r.event {
                Event::Assign { item, .. } => seen[*item as usize].push("ASSIGN"),
                Event::Start { item } => seen[*item as usize].push("START"),
                Event::Finish { item, .. } => seen[*item as usize].push("FINISH"),
                _ => {}
            }
        }
        for s in seen {
            prop_assert_eq!(s, vec!["ASSIGN", "START", "FINISH"]);
        }
        prop_assert!(engine.enabled_tasks().unwrap().is_empty());
        prop_assert_eq!(engine.remainder(), Process::Empty);
    }
}

#[test]
fn every_fixture_replays_to_the_same_hash() {
    for f in FIXTURES {
        let def = parse_scenario(f.scenario).unwrap();
        let (engine, _) = run(def.clone(), f.events);
        let log = engine.log();
        let replayed = replay(&def, log).unwrap_or_else(|e| panic!("{}: {e}", f.name));
        assert_eq!(replayed.last_hash(), engine.last_hash(), "{}", f.name);
        assert_eq!(replayed.state(), engine.state(), "{}", f.name);
        // any prefix is a valid state with matching hashes
        for n in 0..log.len() {
            let prefix = replay(&def, &log[..n]).unwrap_or_else(|e| panic!("{} prefix {n}: {e}", f.name));
            assert_eq!(prefix.last_hash(), n.checked_sub(1).map(|i| log[i].state_hash.as_str()));
        }
    }
}

#[test]
fn runs_are_byte_identical() {
    for f in FIXTURES {
        let def = parse_scenario(f.scenario).unwrap();
        let a = run(def.clone(), f.events).0;
        let b = run(def, f.events).0;
        let lines = |e: &Engine| e.log().iter().map(|r| serde_json::to_string(r).unwrap()).collect::<Vec<_>>();
        assert_eq!(lines(&a), lines(&b), "{}", f.name);
    }
}

#[test]
fn mutated_outcome_is_detected() {
    let def = fixtures::rescue_grid();
    let (engine, _) = run(def.clone(), None);
    let mut log = engine.log().to_vec();
    let i = log.iter().position(|r| r.event.kind() == "FINISH").unwrap();
    let Event::Finish { observed, .. } = &mut log[i].event else { unreachable!() };
    observed[0].value = Value::object("loc_1_1");
    let err = replay(&def, &log).unwrap_err();
    assert_eq!(err.code(), "HASH_MISMATCH");
    assert!(err.to_string().contains(&format!("record {i}")));
}

#[test]
fn log_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("reflow-log-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("divergent.cpplog");
    let def = parse_scenario(fixtures::RESCUE_GRID_DIVERGENT).unwrap();
    let mut engine = Engine::start(def.clone(), Box::new(FileSink::create(&path).unwrap())).unwrap();
    run_auto(&mut engine, &mut EventScript::new(vec![])).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), engine.log().len());
    let records = parse_log(&text).unwrap();
    assert_eq!(records, engine.log());
    let replayed = replay(&def, &records).unwrap();
    assert_eq!(replayed.mode(), Mode::Completed);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn memory_sink_sees_every_record() {
    let sink = MemorySink::default();
    let mut engine = Engine::start(fixtures::rescue_grid(), Box::new(sink.clone())).unwrap();
    run_auto(&mut engine, &mut EventScript::new(vec![])).unwrap();
    assert_eq!(sink.0.lock().unwrap().as_slice(), engine.log());
}

#[test]
fn repaired_run_ends_where_the_faithful_run_ends() {
    let faithful = run(fixtures::rescue_grid(), None).0;
    let (repaired, status) = run(parse_scenario(fixtures::RESCUE_GRID_DIVERGENT).unwrap(), None);
    assert_eq!(status, RunStatus::Completed);
    assert_eq!(repaired.state().phy, faithful.state().phy);
    assert_eq!(repaired.realignment_violations(), 0);
    let (exo, _) = run(fixtures::rescue_grid(), Some(fixtures::RESCUE_GRID_EXOGENOUS_EVENTS));
    assert_eq!(exo.state().phy, faithful.state().phy);
}

#[test]
fn lazy_monitor_ignores_irrelevant_divergence() {
    // photoTaken diverges while the remainder only moves
    let mut def = fixtures::rescue_grid();
    def.monitor = reflow_core::MonitorMode::Lazy;
    def.process = Process::Seq(vec![
        Process::task("takephoto", ["rbt1", "loc_0_0"]),
        Process::task("move", ["rbt1", "loc_0_0", "loc_0_1"]),
    ]);
    let mut e = Engine::in_memory(def.clone()).unwrap();
    e.assign(&TaskCall::new("takephoto", ["rbt1", "loc_0_0"])).unwrap();
    e.start_item(0).unwrap();
    e.finish_faithful(0).unwrap();
    e.inject("photolost", &["loc_0_0".into()]).unwrap();
    assert_eq!(e.mismatch().len(), 1);
    assert_eq!(e.mode(), Mode::Running);

    // the same divergence under EAGER adapts at once
    def.monitor = reflow_core::MonitorMode::Eager;
    let mut e = Engine::in_memory(def).unwrap();
    e.assign(&TaskCall::new("takephoto", ["rbt1", "loc_0_0"])).unwrap();
    e.start_item(0).unwrap();
    e.finish_faithful(0).unwrap();
    e.inject("photolost", &["loc_0_0".into()]).unwrap();
    assert_eq!(e.mode(), Mode::Adapting);
}

#[test]
fn lazy_monitor_adapts_when_the_remainder_is_done() {
    let mut def = fixtures::rescue_grid();
    def.monitor = reflow_core::MonitorMode::Lazy;
    let events = "after takephoto(rbt1, loc_0_1): photolost(loc_0_1);";
    let (e, status) = run(def, Some(events));
    assert_eq!(status, RunStatus::Completed);
    assert!(e.log().iter().any(|r| r.event.kind() == "ADAPT_SPLICE"));
}

#[test]
fn stalled_enabling_reports_no_tasks() {
    // EXP violates adjacency for the first move
    let mut def = fixtures::rescue_grid();
    def.process = Process::task("move", ["rbt1", "loc_0_0", "loc_2_2"]);
    let (e, status) = run(def, None);
    assert_eq!(status, RunStatus::Stalled);
    assert!(e.enabled_tasks().unwrap().is_empty());
}

#[test]
fn adaptation_loop_is_bounded() {
    // every move of rbt1 fails, so recovery plans keep failing
    let text = fixtures::RESCUE_GRID.replace(
        "process {",
        "scripts { rbt1 { on move(rbt1, _, _): fail { at(rbt1) := loc_0_0; } } }\nprocess {",
    );
    let def = parse_scenario(&text).unwrap();
    let limit = def.adaptation_limit;
    let (e, status) = run(def, None);
    assert_eq!(status, RunStatus::Manual);
    assert_eq!(
        e.state().adaptation.last_failure,
        Some(reflow_core::engine::AdaptFailReason::AdaptationLoop)
    );
    let begins = e.log().iter().filter(|r| r.event.kind() == "ADAPT_BEGIN").count();
    assert_eq!(begins as u32, limit + 1);
}

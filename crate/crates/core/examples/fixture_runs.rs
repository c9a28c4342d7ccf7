//! Runs every shipped fixture headlessly and prints how it ended.

use reflow_core::fixtures::FIXTURES;
use reflow_core::runner::{exit_code, run_auto, EventScript};
use reflow_core::scenario::{parse_events_script, parse_scenario};
use reflow_core::Engine;

fn main() {
    for f in FIXTURES {
        let def = parse_scenario(f.scenario).expect("fixture parses");
        let events = f.events.map(|e| parse_events_script(e).expect("events parse")).unwrap_or_default();
        let mut engine = Engine::in_memory(def).expect("genesis");
        let status = run_auto(&mut engine, &mut EventScript::new(events)).expect("run");
        let kinds: Vec<&str> = engine.log().iter().map(|r| r.event.kind()).collect();
        println!("{:24} {status} exit={} records={}", f.name, exit_code(status, engine.state()), kinds.len());
        println!("  {}", kinds.join(" "));
    }
}

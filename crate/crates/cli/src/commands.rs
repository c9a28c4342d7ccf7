use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use reflow_core::adaptation::{build_recovery, search_config};
use reflow_core::engine::Mode;
use reflow_core::log::{read_log, replay, FileSink, LogSink, NullSink};
use reflow_core::planner::{export_pddl, ground};
use reflow_core::runner::{exit_code, run_auto, step, EventScript, RunStatus};
use reflow_core::scenario::{parse_events_script, parse_scenario, parse_unchecked, validate_scenario, MonitorMode, ScenarioDefinition};
use reflow_core::{Engine, RecoveryOutcome};

pub const EXIT_COMPLETED: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 3;
/// The run is waiting: nothing is enabled and no operator acts.
pub const EXIT_WAITING: i32 = 5;

/// Prints an error, prefixed with its code unless the message has it.
fn report(out: &mut dyn Write, code: &str, e: &dyn std::fmt::Display) -> std::io::Result<()> {
    let msg = e.to_string();
    if msg.starts_with(code) {
        writeln!(out, "{msg}")
    } else {
        writeln!(out, "{code}: {msg}")
    }
}

/// Loads a scenario, printing violations and returning `Err(exit code)`
/// when it does not parse or validate.
pub fn load(path: &Path, out: &mut dyn Write) -> Result<std::result::Result<ScenarioDefinition, i32>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match parse_scenario(&text) {
        Ok(def) => Ok(Ok(def)),
        Err(e) => {
            report(out, e.code(), &e)?;
            Ok(Err(EXIT_VALIDATION))
        }
    }
}

fn load_events(path: Option<&Path>) -> Result<EventScript> {
    let events = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_events_script(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => Vec::new(),
    };
    Ok(EventScript::new(events))
}

pub struct RunArgs<'a> {
    pub scenario: &'a Path,
    pub auto: bool,
    pub events: Option<&'a Path>,
    pub monitor: Option<MonitorMode>,
    pub out: Option<&'a Path>,
    pub seed: Option<u64>,
}

pub fn run(args: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let mut def = match load(args.scenario, out)? {
        Ok(d) => d,
        Err(code) => return Ok(code),
    };
    if let Some(m) = args.monitor {
        def.monitor = m;
    }
    if let Some(s) = args.seed {
        def.seed = s;
    }
    let sink: Box<dyn LogSink + Send> = match args.out {
        Some(p) => Box::new(FileSink::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(NullSink),
    };
    let mut engine = Engine::start(def, sink)?;
    if !args.auto {
        // without auto-assign nobody claims work; report what is enabled
        writeln!(out, "loaded; enabled tasks:")?;
        for call in engine.enabled_tasks()? {
            writeln!(out, "  {call}")?;
        }
        writeln!(out, "use --auto for a headless run, or `reflow serve` to drive it")?;
        return Ok(if engine.mode() == Mode::Completed { EXIT_COMPLETED } else { EXIT_WAITING });
    }
    let mut script = load_events(args.events)?;
    let status = run_auto(&mut engine, &mut script)?;
    let st = engine.state();
    writeln!(
        out,
        "{}: {} records, {} adaptations",
        st.mode,
        engine.log().len(),
        st.adaptation.count
    )?;
    if let Some(reason) = st.adaptation.last_failure {
        writeln!(out, "last adaptation failure: {reason}")?;
    }
    if status == RunStatus::Stalled {
        writeln!(out, "stalled: no task is enabled")?;
    }
    if let Some(h) = engine.last_hash() {
        writeln!(out, "state hash {h}")?;
    }
    Ok(exit_code(status, st))
}

pub fn replay_log(scenario: &Path, log: &Path, out: &mut dyn Write) -> Result<i32> {
    let def = match load(scenario, out)? {
        Ok(d) => d,
        Err(code) => return Ok(code),
    };
    let records = match read_log(log) {
        Ok(r) => r,
        Err(e) => {
            report(out, e.code(), &e)?;
            return Ok(EXIT_FAILURE);
        }
    };
    match replay(&def, &records) {
        Ok(engine) => {
            writeln!(out, "{}: {} records replayed", engine.mode(), records.len())?;
            if let Some(h) = engine.last_hash() {
                writeln!(out, "state hash {h}")?;
            }
            Ok(EXIT_COMPLETED)
        }
        Err(e) => {
            report(out, e.code(), &e)?;
            Ok(EXIT_FAILURE)
        }
    }
}

/// Runs headlessly up to the first point where adaptation is requested.
/// Returns the engine there, or `None` if the run never diverges.
fn run_to_gap(def: ScenarioDefinition, events: Option<&Path>) -> Result<Option<Engine>> {
    let mut engine = Engine::in_memory(def)?;
    let mut script = load_events(events)?;
    loop {
        if engine.needs_adaptation() {
            return Ok(Some(engine));
        }
        if matches!(engine.mode(), Mode::Completed | Mode::Manual | Mode::Aborted) {
            return Ok(None);
        }
        if !step(&mut engine, &mut script)? {
            return Ok(None);
        }
    }
}

pub fn plan(scenario: &Path, events: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let def = match load(scenario, out)? {
        Ok(d) => d,
        Err(code) => return Ok(code),
    };
    let config = search_config(&def, None);
    let Some(engine) = run_to_gap(def, events)? else {
        writeln!(out, "no gap: the run never needs adaptation")?;
        return Ok(EXIT_COMPLETED);
    };
    writeln!(out, "gap after record {}:", engine.log().len() - 1)?;
    for g in engine.mismatch() {
        let st = engine.state();
        let show = |v: Option<&reflow_core::Value>| v.map_or("-".to_string(), |v| v.to_string());
        writeln!(out, "  {g}: expected {}, physical {}", show(st.exp.get(&g)), show(st.phy.get(&g)))?;
    }
    match build_recovery(engine.state(), &engine.def().theory, &config) {
        RecoveryOutcome::Spliced { plan } => {
            writeln!(out, "plan ({} steps):", plan.len())?;
            for call in plan {
                writeln!(out, "  {call}")?;
            }
            Ok(EXIT_COMPLETED)
        }
        RecoveryOutcome::Unsolvable { detail } => {
            writeln!(out, "UNSOLVABLE: {detail}")?;
            Ok(2)
        }
        RecoveryOutcome::ResourceExhausted { detail } => {
            writeln!(out, "RESOURCE_LIMIT: {detail}")?;
            Ok(4)
        }
    }
}

/// Writes `domain.pddl` and `problem.pddl` for the first gap of the run,
/// or for the initial state if the run never diverges.
pub fn export(scenario: &Path, events: Option<&Path>, dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let def = match load(scenario, out)? {
        Ok(d) => d,
        Err(code) => return Ok(code),
    };
    let theory = def.theory.clone();
    let (phy, exp) = match run_to_gap(def.clone(), events)? {
        Some(e) => (e.state().phy.clone(), e.state().exp.clone()),
        None => {
            writeln!(out, "no gap: exporting the initial state")?;
            let r = theory
                .initial_reality()
                .map_err(|missing| anyhow::anyhow!("initial state misses {} instances", missing.len()))?;
            (r.clone(), r)
        }
    };
    let problem = match ground(&theory, &phy, &exp) {
        Ok(p) => p,
        Err(e) => {
            writeln!(out, "cannot ground: {e}")?;
            return Ok(EXIT_FAILURE);
        }
    };
    let pddl = export_pddl(&problem, &theory);
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("domain.pddl"), &pddl.domain)?;
    std::fs::write(dir.join("problem.pddl"), &pddl.problem)?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(EXIT_COMPLETED)
}

pub fn validate(scenario: &Path, out: &mut dyn Write) -> Result<i32> {
    let text = std::fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let def = match parse_unchecked(&text) {
        Ok(d) => d,
        Err(e) => {
            writeln!(out, "{e}")?;
            return Ok(EXIT_VALIDATION);
        }
    };
    let report = validate_scenario(&def);
    if report.violations.is_empty() {
        writeln!(out, "ok")?;
        return Ok(EXIT_COMPLETED);
    }
    for v in &report.violations {
        writeln!(out, "{v}")?;
    }
    Ok(EXIT_VALIDATION)
}

//! Scenario documents: the textual bundle of domain theory, process,
//! participant scripts and discretization rules.

mod lexer;
mod parser;
mod printer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_domain, DomainTheory, ValidationReport, Violation};
use crate::gateway::{validate_rules, validate_scripts, DiscretizationRule, ParticipantScript};
use crate::process::{validate_process, Process, TaskCall};

pub use printer::{print_formula, print_process, print_scenario};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MonitorMode {
    #[default]
    Eager,
    Lazy,
}

impl fmt::Display for MonitorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MonitorMode::Eager => "eager",
            MonitorMode::Lazy => "lazy",
        })
    }
}

impl std::str::FromStr for MonitorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eager" => Ok(MonitorMode::Eager),
            "lazy" => Ok(MonitorMode::Lazy),
            _ => Err(format!("unknown monitor mode {s:?} (expected eager or lazy)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDefinition {
    pub theory: DomainTheory,
    pub process: Process,
    pub scripts: Vec<ParticipantScript>,
    pub rules: Vec<DiscretizationRule>,
    pub seed: u64,
    pub monitor: MonitorMode,
    /// Synthesized non-empty plans wait for operator approval before splicing.
    pub approval: bool,
    pub adaptation_limit: u32,
    pub node_limit: u64,
}

pub const DEFAULT_ADAPTATION_LIMIT: u32 = 10;
pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

impl Default for ScenarioDefinition {
    fn default() -> Self {
        ScenarioDefinition {
            theory: DomainTheory::default(),
            process: Process::Empty,
            scripts: vec![],
            rules: vec![],
            seed: 0,
            monitor: MonitorMode::Eager,
            approval: false,
            adaptation_limit: DEFAULT_ADAPTATION_LIMIT,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("SYNTAX_ERROR at {line}:{col}: expected {}, found {found}", expected_list(.expected))]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

fn expected_list(items: &[String]) -> String {
    match items {
        [] => "valid input".into(),
        [one] => one.clone(),
        _ => format!("one of {}", items.join(", ")),
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{}", render_violations(.0))]
    Invalid(Vec<Violation>),
}

fn render_violations(vs: &[Violation]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")
}

impl ScenarioError {
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::Syntax(_) => "SYNTAX_ERROR",
            ScenarioError::Invalid(vs) => vs.first().map_or("INVALID", |v| v.code.as_str()),
        }
    }
}

/// Parses without semantic validation.
pub fn parse_unchecked(text: &str) -> Result<ScenarioDefinition, SyntaxError> {
    parser::Parser::new(text)?.document()
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioDefinition, ScenarioError> {
    let def = parse_unchecked(text)?;
    let report = validate_scenario(&def);
    if report.is_ok() {
        Ok(def)
    } else {
        Err(ScenarioError::Invalid(report.violations))
    }
}

/// Collects every semantic violation across theory, process, scripts and rules.
pub fn validate_scenario(def: &ScenarioDefinition) -> ValidationReport {
    let mut report = validate_domain(&def.theory);
    report.violations.extend(validate_process(&def.process, &def.theory));
    report.violations.extend(validate_rules(&def.rules, &def.theory));
    report
        .violations
        .extend(validate_scripts(&def.scripts, &def.rules, &def.theory));
    report
}

/// Parses a standalone process term, e.g. for operator remainder replacement.
pub fn parse_process(text: &str) -> Result<Process, SyntaxError> {
    let mut p = parser::Parser::new(text)?;
    let out = p.process()?;
    p.expect_eof()?;
    Ok(out)
}

pub fn parse_task_call(text: &str) -> Result<TaskCall, SyntaxError> {
    let mut p = parser::Parser::new(text)?;
    let out = p.task_call()?;
    p.expect_eof()?;
    Ok(out)
}

/// One line of an exogenous events script.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventTrigger {
    /// Fire right after the given task call finishes (each occurrence once).
    After(TaskCall),
    /// Fire once the log holds at least this many records.
    At(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub trigger: EventTrigger,
    pub event: String,
    pub args: Vec<String>,
}

/// Parses an events script: `after move(rbt1, a, b): photolost(a);` or
/// `at 7: alarm;`, one statement per `;`.
pub fn parse_events_script(text: &str) -> Result<Vec<ScriptedEvent>, SyntaxError> {
    let mut p = parser::Parser::new(text)?;
    let mut out = Vec::new();
    while !p.at_eof() {
        let trigger = match p.keyword()?.as_str() {
            "after" => EventTrigger::After(p.task_call()?),
            "at" => EventTrigger::At(p.integer_value()?),
            other => {
                return Err(SyntaxError {
                    line: 0,
                    col: 0,
                    expected: vec!["`after`".into(), "`at`".into()],
                    found: format!("`{other}`"),
                })
            }
        };
        p.expect_colon()?;
        let (event, args) = p.event_call()?;
        p.expect_semi()?;
        out.push(ScriptedEvent { trigger, event, args });
    }
    Ok(out)
}

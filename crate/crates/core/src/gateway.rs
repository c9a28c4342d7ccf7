//! Service layer adapter: capability matching, scripted participants that
//! stand in for humans and devices, and continuous-to-discrete mapping rules.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    instantiate_effects, DomainError, DomainTheory, GroundAssignment, GroundFluent, RangeType,
    ServiceSpec, TaskSpec, Value, Violation, ViolationCode,
};
use crate::engine::{ItemStatus, WorkItem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("NO_CAPABLE_SERVICE: no free service provides {0:?}")]
    NoCapableService(BTreeSet<String>),
    #[error("OUT_OF_RANGE: {value} outside [{min}, {max}) of rule {rule}")]
    OutOfRange { rule: String, value: f64, min: f64, max: f64 },
    #[error("UNKNOWN_RULE: no discretization rule for source {0}")]
    UnknownRule(String),
    #[error("BAD_READING: {0}")]
    BadReading(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::NoCapableService(_) => "NO_CAPABLE_SERVICE",
            GatewayError::OutOfRange { .. } => "OUT_OF_RANGE",
            GatewayError::UnknownRule(_) => "UNKNOWN_RULE",
            GatewayError::BadReading(_) => "BAD_READING",
            GatewayError::Domain(e) => e.code(),
        }
    }
}

/// The lexicographically smallest free service providing every capability
/// the task requires.
pub fn match_service<'a>(
    task: &TaskSpec,
    services: &'a [ServiceSpec],
    busy: &BTreeSet<String>,
) -> Result<&'a ServiceSpec, GatewayError> {
    services
        .iter()
        .filter(|s| !busy.contains(&s.id) && s.provides.is_superset(&task.requires))
        .min_by(|a, b| a.id.cmp(&b.id))
        .ok_or_else(|| GatewayError::NoCapableService(task.requires.clone()))
}

/// A value as reported by a participant: either already discrete or a raw
/// sensor reading to be mapped through a discretization rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservedValue {
    Value(Value),
    Reading { source: String, values: Vec<f64> },
}

impl fmt::Display for ObservedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservedValue::Value(v) => write!(f, "{v}"),
            ObservedValue::Reading { source, values } => {
                let vs: Vec<String> = values.iter().map(f64::to_string).collect();
                write!(f, "{source}({})", vs.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedAssignment {
    pub fluent: String,
    pub args: Vec<String>,
    pub value: ObservedValue,
}

impl ObservedAssignment {
    pub fn ground(a: GroundAssignment) -> Self {
        ObservedAssignment {
            fluent: a.fluent,
            args: a.args,
            value: ObservedValue::Value(a.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Behavior {
    Faithful,
    Outcome(Vec<ObservedAssignment>),
    FailWith(Vec<ObservedAssignment>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub task: String,
    /// `None` matches any arguments; `Some(None)` entries are wildcards.
    pub args: Option<Vec<Option<String>>>,
    /// Fire only at the k-th matching invocation (1-based); `None` fires on all.
    pub nth: Option<u32>,
    pub behavior: Behavior,
}

impl ScriptRule {
    pub fn matches(&self, call: &crate::process::TaskCall) -> bool {
        self.task == call.task
            && self.args.as_ref().is_none_or(|pat| {
                pat.len() == call.args.len()
                    && pat
                        .iter()
                        .zip(&call.args)
                        .all(|(p, a)| p.as_ref().is_none_or(|p| p == a))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantScript {
    pub service: String,
    pub rules: Vec<ScriptRule>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeLabel {
    Faithful,
    Outcome,
    Fail,
    Manual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedOutcome {
    pub label: OutcomeLabel,
    pub observed: Vec<ObservedAssignment>,
}

/// Produces the observed outcome for a started work item.
///
/// Invocation counts are derived from `history`: the k-th invocation of a
/// rule is the k-th started item of the same service whose call matches
/// the rule's pattern, ordered by item id.
pub fn simulate_outcome(
    item: &WorkItem,
    scripts: &[ParticipantScript],
    theory: &DomainTheory,
    history: &[WorkItem],
) -> Result<SimulatedOutcome, GatewayError> {
    let script = scripts.iter().find(|s| s.service == item.service);
    if let Some(script) = script {
        for rule in &script.rules {
            if !rule.matches(&item.call) {
                continue;
            }
            let count = history
                .iter()
                .filter(|h| {
                    h.service == item.service
                        && h.id <= item.id
                        && h.status >= ItemStatus::Started
                        && rule.matches(&h.call)
                })
                .count() as u32;
            if rule.nth.is_some_and(|k| k != count) {
                continue;
            }
            return Ok(match &rule.behavior {
                Behavior::Faithful => faithful(item, theory)?,
                Behavior::Outcome(a) => SimulatedOutcome {
                    label: OutcomeLabel::Outcome,
                    observed: a.clone(),
                },
                Behavior::FailWith(a) => SimulatedOutcome {
                    label: OutcomeLabel::Fail,
                    observed: a.clone(),
                },
            });
        }
    }
    faithful(item, theory)
}

fn faithful(item: &WorkItem, theory: &DomainTheory) -> Result<SimulatedOutcome, GatewayError> {
    let task = theory
        .task(&item.call.task)
        .ok_or_else(|| DomainError::TypeMismatch {
            subject: item.call.to_string(),
            detail: "unknown task".into(),
        })?;
    let binding = theory.bind(&task.params, &item.call.args)?;
    Ok(SimulatedOutcome {
        label: OutcomeLabel::Faithful,
        observed: instantiate_effects(&task.effects, &binding)?
            .into_iter()
            .map(ObservedAssignment::ground)
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub object: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarRule {
    pub source: String,
    pub target: String,
    pub min: f64,
    pub max: f64,
    pub intervals: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub object: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRule {
    pub source: String,
    pub target: String,
    pub regions: Vec<Region>,
    pub fallback: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DiscretizationRule {
    Scalar(ScalarRule),
    Region(RegionRule),
}

impl DiscretizationRule {
    pub fn source(&self) -> &str {
        match self {
            DiscretizationRule::Scalar(r) => &r.source,
            DiscretizationRule::Region(r) => &r.source,
        }
    }

    pub fn target(&self) -> &str {
        match self {
            DiscretizationRule::Scalar(r) => &r.target,
            DiscretizationRule::Region(r) => &r.target,
        }
    }
}

/// Maps a value into the unique half-open interval `[lo, hi)` containing it.
pub fn discretize_scalar(value: f64, rule: &ScalarRule) -> Result<String, GatewayError> {
    let out_of_range = || GatewayError::OutOfRange {
        rule: rule.source.clone(),
        value,
        min: rule.min,
        max: rule.max,
    };
    if !(rule.min <= value && value < rule.max) {
        return Err(out_of_range());
    }
    rule.intervals
        .iter()
        .find(|i| i.lo <= value && value < i.hi)
        .map(|i| i.object.clone())
        .ok_or_else(out_of_range)
}

/// First region in declared order containing the point (closed on the low
/// edges, open on the high edges), else the fallback.
pub fn discretize_point(x: f64, y: f64, rule: &RegionRule) -> String {
    rule.regions
        .iter()
        .find(|r| r.x0 <= x && x < r.x1 && r.y0 <= y && y < r.y1)
        .map_or_else(|| rule.fallback.clone(), |r| r.object.clone())
}

/// Resolves observed assignments to ground assignments, mapping raw readings
/// through the rule registered for their source.
pub fn resolve_observed(
    observed: &[ObservedAssignment],
    rules: &[DiscretizationRule],
) -> Result<Vec<GroundAssignment>, GatewayError> {
    observed
        .iter()
        .map(|o| {
            let value = match &o.value {
                ObservedValue::Value(v) => v.clone(),
                ObservedValue::Reading { source, values } => {
                    Value::Object(discretize_reading(source, values, rules)?)
                }
            };
            Ok(GroundAssignment {
                fluent: o.fluent.clone(),
                args: o.args.clone(),
                value,
            })
        })
        .collect()
}

pub fn discretize_reading(
    source: &str,
    values: &[f64],
    rules: &[DiscretizationRule],
) -> Result<String, GatewayError> {
    let rule = rules
        .iter()
        .find(|r| r.source() == source)
        .ok_or_else(|| GatewayError::UnknownRule(source.to_string()))?;
    match (rule, values) {
        (DiscretizationRule::Scalar(r), [v]) => discretize_scalar(*v, r),
        (DiscretizationRule::Region(r), [x, y]) => Ok(discretize_point(*x, *y, r)),
        (DiscretizationRule::Scalar(_), _) => Err(GatewayError::BadReading(format!(
            "scalar source {source} takes one value, got {}",
            values.len()
        ))),
        (DiscretizationRule::Region(_), _) => Err(GatewayError::BadReading(format!(
            "region source {source} takes two coordinates, got {}",
            values.len()
        ))),
    }
}

/// Checks rules: scalar intervals must be ordered, disjoint and cover
/// `[min, max)` exactly; every mapped object must belong to the target type.
pub fn validate_rules(rules: &[DiscretizationRule], theory: &DomainTheory) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut sources = BTreeSet::new();
    for rule in rules {
        let subject = format!("rule {}", rule.source());
        let mut bad = |detail: String| {
            out.push(Violation::new(ViolationCode::InvalidRule, subject.clone(), detail));
        };
        if !sources.insert(rule.source().to_string()) {
            bad("source declared twice".into());
        }
        if theory.data_type(rule.target()).is_none() {
            bad(format!("unknown target type {}", rule.target()));
            continue;
        }
        let mut objects: Vec<&str> = Vec::new();
        match rule {
            DiscretizationRule::Scalar(r) => {
                // NaN bounds fail too
                if r.min.partial_cmp(&r.max) != Some(std::cmp::Ordering::Less) {
                    bad(format!("empty range [{}, {})", r.min, r.max));
                }
                let mut cursor = r.min;
                for i in &r.intervals {
                    if i.lo.partial_cmp(&i.hi) != Some(std::cmp::Ordering::Less) {
                        bad(format!("empty interval [{}, {})", i.lo, i.hi));
                    }
                    if i.lo != cursor {
                        bad(format!(
                            "intervals must be ordered, disjoint and exhaustive: expected {cursor}, found {}",
                            i.lo
                        ));
                    }
                    cursor = i.hi;
                    objects.push(&i.object);
                }
                if cursor != r.max {
                    bad(format!("intervals end at {cursor}, range ends at {}", r.max));
                }
            }
            DiscretizationRule::Region(r) => {
                for reg in &r.regions {
                    if !(reg.x0 < reg.x1 && reg.y0 < reg.y1) {
                        bad(format!("degenerate rectangle ({}, {}, {}, {})", reg.x0, reg.y0, reg.x1, reg.y1));
                    }
                    objects.push(&reg.object);
                }
                objects.push(&r.fallback);
            }
        }
        for o in objects {
            if !theory.is_member(rule.target(), o) {
                bad(format!("{o} is not a member of {}", rule.target()));
            }
        }
    }
    out
}

/// Checks observed assignments that appear in scripts: fluents, argument
/// membership, and that readings come from a rule targeting the fluent's range.
pub(crate) fn check_observed(
    subject: &str,
    observed: &[ObservedAssignment],
    rules: &[DiscretizationRule],
    theory: &DomainTheory,
    out: &mut Vec<Violation>,
) {
    for o in observed {
        let target = GroundFluent::new(&o.fluent, o.args.iter().map(String::as_str));
        match &o.value {
            ObservedValue::Value(v) => {
                let ga = GroundAssignment::new(target, v.clone());
                if let Err(e) = theory.check_ground(&ga) {
                    out.push(Violation::new(ViolationCode::InvalidScript, subject, e.to_string()));
                }
            }
            ObservedValue::Reading { source, .. } => {
                let range = theory.fluent(&o.fluent).map(|f| &f.range);
                match (rules.iter().find(|r| r.source() == source), range) {
                    (None, _) => out.push(Violation::new(
                        ViolationCode::InvalidScript,
                        subject,
                        format!("no discretization rule for source {source}"),
                    )),
                    (Some(r), Some(RangeType::Type(t))) if r.target() == t => {}
                    (Some(r), _) => out.push(Violation::new(
                        ViolationCode::InvalidScript,
                        subject,
                        format!("rule {source} maps into {}, which is not the range of {}", r.target(), o.fluent),
                    )),
                }
            }
        }
    }
}

pub fn validate_scripts(
    scripts: &[ParticipantScript],
    rules: &[DiscretizationRule],
    theory: &DomainTheory,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for s in scripts {
        let subject = format!("script {}", s.service);
        if theory.service(&s.service).is_none() {
            out.push(Violation::new(ViolationCode::UnknownService, &subject, format!("unknown service {}", s.service)));
        }
        if !seen.insert(&s.service) {
            out.push(Violation::new(ViolationCode::DuplicateName, &subject, "service scripted twice"));
        }
        for rule in &s.rules {
            match theory.task(&rule.task) {
                None => out.push(Violation::new(
                    ViolationCode::UnknownTask,
                    &subject,
                    format!("unknown task {}", rule.task),
                )),
                Some(task) => {
                    if let Some(pat) = &rule.args {
                        if pat.len() != task.params.len() {
                            out.push(Violation::new(
                                ViolationCode::ArityMismatch,
                                &subject,
                                format!("pattern for {} has {} arguments", rule.task, pat.len()),
                            ));
                        }
                    }
                }
            }
            if rule.nth == Some(0) {
                out.push(Violation::new(ViolationCode::InvalidScript, &subject, "invocation numbers start at 1"));
            }
            if let Behavior::Outcome(a) | Behavior::FailWith(a) = &rule.behavior {
                check_observed(&subject, a, rules, theory, &mut out);
            }
        }
    }
    out
}

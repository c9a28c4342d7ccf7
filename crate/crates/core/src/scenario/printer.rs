//! Canonical printer. `parse_unchecked(print_scenario(d)) == d` for every
//! definition whose conjunctions and disjunctions have at least two members.

use std::fmt::Write;

use super::ScenarioDefinition;
use crate::domain::{Assignment, FluentTerm, Formula, Operand, RangeType, Term};
use crate::gateway::{Behavior, DiscretizationRule, ObservedAssignment, ObservedValue};
use crate::process::Process;

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("?{v}"),
        Term::Object(o) => o.clone(),
        Term::Bool(b) => b.to_string(),
    }
}

fn fluent_term(f: &FluentTerm) -> String {
    let args: Vec<String> = f.args.iter().map(term).collect();
    format!("{}({})", f.fluent, args.join(", "))
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Term(t) => term(t),
        Operand::Fluent(f) => fluent_term(f),
    }
}

pub fn print_formula(f: &Formula) -> String {
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Eq(l, r) => format!("{} = {}", fluent_term(l), operand(r)),
        Formula::Neq(l, r) => format!("{} != {}", fluent_term(l), operand(r)),
        Formula::Static(name, args) => {
            let args: Vec<String> = args.iter().map(term).collect();
            format!("{name}({})", args.join(", "))
        }
        Formula::Not(g) => format!("not {}", nested(g)),
        Formula::And(gs) => junction(gs, " and "),
        Formula::Or(gs) => junction(gs, " or "),
        Formula::Forall(v, ty, g) => format!("forall ?{v}: {ty} ({})", print_formula(g)),
        Formula::Exists(v, ty, g) => format!("exists ?{v}: {ty} ({})", print_formula(g)),
    }
}

fn nested(f: &Formula) -> String {
    match f {
        Formula::And(_) | Formula::Or(_) => format!("({})", print_formula(f)),
        _ => print_formula(f),
    }
}

fn junction(gs: &[Formula], sep: &str) -> String {
    gs.iter().map(nested).collect::<Vec<_>>().join(sep)
}

fn assignment(a: &Assignment) -> String {
    format!("{} := {}", fluent_term(&a.target), term(&a.value))
}

fn ground(fluent: &str, args: &[String]) -> String {
    if args.is_empty() {
        fluent.to_string()
    } else {
        format!("{fluent}({})", args.join(", "))
    }
}

fn observed(o: &ObservedAssignment) -> String {
    let value = match &o.value {
        ObservedValue::Value(v) => v.to_string(),
        ObservedValue::Reading { source, values } => {
            let vs: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            format!("{source}({})", vs.join(", "))
        }
    };
    format!("{} := {value}", ground(&o.fluent, &o.args))
}

pub fn print_process(p: &Process) -> String {
    let mut out = String::new();
    process_into(p, 0, &mut out);
    out
}

fn indent(level: usize) -> String {
    "  ".repeat(level)
}

fn process_into(p: &Process, level: usize, out: &mut String) {
    match p {
        Process::Empty => out.push_str("empty"),
        Process::Task(call) => {
            let _ = write!(out, "{}({})", call.task, call.args.join(", "));
        }
        Process::Seq(ps) | Process::Par(ps) => {
            out.push_str(if matches!(p, Process::Seq(_)) { "seq {" } else { "par {" });
            if ps.is_empty() {
                out.push_str(" }");
                return;
            }
            out.push('\n');
            for q in ps {
                out.push_str(&indent(level + 1));
                process_into(q, level + 1, out);
                out.push('\n');
            }
            out.push_str(&indent(level));
            out.push('}');
        }
        Process::Xor { cond, then, otherwise } => {
            let _ = write!(out, "if {} then ", print_formula(cond));
            process_into(then, level, out);
            out.push_str(" else ");
            process_into(otherwise, level, out);
        }
        Process::Loop { cond, body } => {
            let _ = write!(out, "while {} do ", print_formula(cond));
            process_into(body, level, out);
        }
    }
}

fn params(ps: &[crate::domain::Param]) -> String {
    ps.iter()
        .map(|p| format!("?{}: {}", p.var, p.ty))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn print_scenario(d: &ScenarioDefinition) -> String {
    let mut o = String::new();
    let t = &d.theory;
    let _ = writeln!(o, "seed {};", d.seed);
    let _ = writeln!(o, "monitor {};", d.monitor);
    let _ = writeln!(o, "approval {};", if d.approval { "on" } else { "off" });
    let _ = writeln!(o, "adaptation_limit {};", d.adaptation_limit);
    let _ = writeln!(o, "node_limit {};", d.node_limit);

    o.push_str("\ntypes {\n");
    for ty in &t.data_types {
        let _ = writeln!(o, "  {}: {};", ty.name, ty.members.join(" "));
    }
    o.push_str("}\n\nfluents {\n");
    for f in &t.fluents {
        let range = match &f.range {
            RangeType::Bool => "bool".to_string(),
            RangeType::Type(ty) => ty.clone(),
        };
        let _ = writeln!(o, "  {}({}): {range};", f.name, f.params.join(", "));
    }
    o.push_str("}\n\nstatics {\n");
    for s in &t.statics {
        let _ = writeln!(o, "  {}({}) {{", s.name, s.params.join(", "));
        for tuple in &s.tuples {
            let _ = writeln!(o, "    ({})", tuple.join(", "));
        }
        o.push_str("  }\n");
    }
    let _ = writeln!(o, "}}\n\ncapabilities {{ {} }}", t.capabilities.join(" "));
    o.push_str("\nservices {\n");
    for s in &t.services {
        let caps: Vec<&str> = s.provides.iter().map(String::as_str).collect();
        let _ = writeln!(o, "  {}: {};", s.id, caps.join(" "));
    }
    o.push_str("}\n\ntasks {\n");
    for task in &t.tasks {
        let _ = writeln!(o, "  {}({}) {{", task.name, params(&task.params));
        if !task.requires.is_empty() {
            let caps: Vec<&str> = task.requires.iter().map(String::as_str).collect();
            let _ = writeln!(o, "    requires {};", caps.join(" "));
        }
        let _ = writeln!(o, "    pre {};", print_formula(&task.precondition));
        for e in &task.effects {
            let _ = writeln!(o, "    effect {};", assignment(e));
        }
        if !task.recoverable {
            o.push_str("    recoverable false;\n");
        }
        o.push_str("  }\n");
    }
    o.push_str("}\n\nevents {\n");
    for ev in &t.events {
        let _ = writeln!(o, "  {}({}) {{", ev.name, params(&ev.params));
        for e in &ev.effects {
            let _ = writeln!(o, "    effect {};", assignment(e));
        }
        o.push_str("  }\n");
    }
    o.push_str("}\n");
    if let Some(rel) = &t.relevant {
        let names: Vec<&str> = rel.iter().map(String::as_str).collect();
        let _ = writeln!(o, "\nrelevant {{ {} }}", names.join(" "));
    }
    o.push_str("\ninit {\n");
    for a in &t.initial {
        let _ = writeln!(o, "  {} = {};", ground(&a.fluent, &a.args), a.value);
    }
    o.push_str("}\n\nprocess {\n  ");
    process_into(&d.process, 1, &mut o);
    o.push_str("\n}\n\nscripts {\n");
    for s in &d.scripts {
        let _ = writeln!(o, "  {} {{", s.service);
        for r in &s.rules {
            o.push_str("    on ");
            o.push_str(&r.task);
            if let Some(pat) = &r.args {
                let pat: Vec<&str> = pat.iter().map(|a| a.as_deref().unwrap_or("_")).collect();
                let _ = write!(o, "({})", pat.join(", "));
            }
            if let Some(k) = r.nth {
                let _ = write!(o, " nth {k}");
            }
            match &r.behavior {
                Behavior::Faithful => o.push_str(": faithful;\n"),
                Behavior::Outcome(a) | Behavior::FailWith(a) => {
                    let kw = if matches!(r.behavior, Behavior::Outcome(_)) { "outcome" } else { "fail" };
                    let _ = writeln!(o, ": {kw} {{");
                    for x in a {
                        let _ = writeln!(o, "      {};", observed(x));
                    }
                    o.push_str("    }\n");
                }
            }
        }
        o.push_str("  }\n");
    }
    o.push_str("}\n\nrules {\n");
    for r in &d.rules {
        match r {
            DiscretizationRule::Scalar(s) => {
                let _ = writeln!(o, "  scalar {} -> {} [{}, {}) {{", s.source, s.target, s.min, s.max);
                for i in &s.intervals {
                    let _ = writeln!(o, "    [{}, {}) -> {};", i.lo, i.hi, i.object);
                }
            }
            DiscretizationRule::Region(g) => {
                let _ = writeln!(o, "  region {} -> {} else {} {{", g.source, g.target, g.fallback);
                for r in &g.regions {
                    let _ = writeln!(o, "    ({}, {}, {}, {}) -> {};", r.x0, r.y0, r.x1, r.y1, r.object);
                }
            }
        }
        o.push_str("  }\n");
    }
    o.push_str("}\n");
    o
}

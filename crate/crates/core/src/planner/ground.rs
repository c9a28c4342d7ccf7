use std::collections::BTreeMap;

use super::{AtomId, GroundAction, PlannerError, PlanningProblem, Proposition};
use crate::domain::{
    evaluate_formula, in_strips_fragment, instantiate_effects, Binding, DomainError, DomainTheory,
    Formula, GroundFluent, Operand, Reality, TaskSpec, Value,
};
use crate::process::TaskCall;

/// A precondition under a binding, as a set of required value-atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompiledPrecondition {
    Atoms(BTreeMap<GroundFluent, Value>),
    /// A static atom is false or two equalities disagree.
    Unsatisfiable,
}

/// Compiles a task precondition into value-atoms. Static subformulas are
/// evaluated away and universal quantifiers are expanded.
pub fn compile_precondition(
    theory: &DomainTheory,
    task: &TaskSpec,
    binding: &Binding,
) -> Result<CompiledPrecondition, PlannerError> {
    if !in_strips_fragment(&task.precondition) {
        return Err(PlannerError::UnsupportedPrecondition {
            task: task.name.clone(),
            detail: "only conjunctions of positive equalities and static atoms are plannable".into(),
        });
    }
    let mut atoms = BTreeMap::new();
    Ok(if collect(&task.precondition, binding, theory, &mut atoms)? {
        CompiledPrecondition::Atoms(atoms)
    } else {
        CompiledPrecondition::Unsatisfiable
    })
}

fn collect(
    f: &Formula,
    binding: &Binding,
    theory: &DomainTheory,
    out: &mut BTreeMap<GroundFluent, Value>,
) -> Result<bool, DomainError> {
    if f.is_static() {
        return evaluate_formula(f, &Reality::new(), binding, theory);
    }
    match f {
        Formula::Eq(lhs, Operand::Term(t)) => {
            let instance = lhs.ground(binding)?;
            let value = t.resolve_value(binding)?;
            let in_range = theory
                .fluent(&instance.fluent)
                .is_some_and(|spec| theory.value_in_range(spec, &value));
            if !in_range {
                return Ok(false);
            }
            match out.get(&instance) {
                Some(v) if *v != value => Ok(false),
                _ => {
                    out.insert(instance, value);
                    Ok(true)
                }
            }
        }
        Formula::And(gs) => {
            for g in gs {
                if !collect(g, binding, theory, out)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Forall(var, ty, g) => {
            let members = &theory
                .data_type(ty)
                .ok_or_else(|| DomainError::UnknownType(ty.clone()))?
                .members;
            let mut inner = binding.clone();
            for m in members {
                inner.insert(var.clone(), m.clone());
                if !collect(g, &inner, theory, out)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        _ => unreachable!("fragment checked by compile_precondition"),
    }
}

/// Builds the recovery problem: `phy` gives the initial state, `exp`
/// restricted to relevant fluents gives the goal.
pub fn ground(
    theory: &DomainTheory,
    phy: &Reality,
    exp: &Reality,
) -> Result<PlanningProblem, PlannerError> {
    let mut atoms = Vec::new();
    let mut instances = Vec::new();
    let mut var_of = Vec::new();
    let mut domains = Vec::new();
    let mut index = BTreeMap::new();
    let mut relevant_vars = Vec::new();
    for spec in &theory.fluents {
        let values = theory.range_values(spec);
        for instance in theory.instances(spec) {
            let var = instances.len();
            let mut ids = Vec::with_capacity(values.len());
            for v in &values {
                let p = Proposition {
                    instance: instance.clone(),
                    value: v.clone(),
                };
                index.insert(p.clone(), atoms.len());
                ids.push(atoms.len());
                atoms.push(p);
                var_of.push(var);
            }
            if theory.is_relevant(&spec.name) {
                relevant_vars.push(var);
            }
            instances.push(instance);
            domains.push(ids);
        }
    }

    let lookup = |r: &Reality, instance: &GroundFluent| -> Result<AtomId, PlannerError> {
        let v = r
            .get(instance)
            .ok_or_else(|| PlannerError::IncompleteReality(instance.clone()))?;
        index
            .get(&Proposition {
                instance: instance.clone(),
                value: v.clone(),
            })
            .copied()
            .ok_or_else(|| {
                PlannerError::Domain(DomainError::TypeMismatch {
                    subject: instance.to_string(),
                    detail: format!("{v} is outside the range"),
                })
            })
    };
    let init = instances
        .iter()
        .map(|i| lookup(phy, i))
        .collect::<Result<Vec<_>, _>>()?;
    let goal = relevant_vars
        .iter()
        .map(|&v| lookup(exp, &instances[v]))
        .collect::<Result<Vec<_>, _>>()?;

    let mut actions = Vec::new();
    let mut invisible_tasks = Vec::new();
    for task in theory.tasks.iter().filter(|t| t.recoverable) {
        if !in_strips_fragment(&task.precondition) {
            invisible_tasks.push(task.name.clone());
            continue;
        }
        for binding in theory.bindings(&task.params) {
            let CompiledPrecondition::Atoms(pre_map) = compile_precondition(theory, task, &binding)? else {
                continue;
            };
            let mut pre: Vec<AtomId> = pre_map
                .iter()
                .map(|(i, v)| index[&Proposition { instance: i.clone(), value: v.clone() }])
                .collect();
            pre.sort_unstable();

            // Last writer wins per instance.
            let mut writes: BTreeMap<GroundFluent, Value> = BTreeMap::new();
            for a in instantiate_effects(&task.effects, &binding)? {
                theory.check_ground(&a)?;
                writes.insert(a.target(), a.value);
            }
            let mut add = Vec::new();
            let mut del = Vec::new();
            for (instance, value) in writes {
                let p = Proposition { instance, value };
                let id = index[&p];
                add.push(id);
                del.extend(domains[var_of[id]].iter().copied().filter(|&o| o != id));
            }
            add.sort_unstable();
            del.sort_unstable();

            let args = task.params.iter().map(|p| binding[&p.var].clone()).collect();
            actions.push(GroundAction {
                call: TaskCall { task: task.name.clone(), args },
                pre,
                add,
                del,
            });
        }
    }

    Ok(PlanningProblem {
        atoms,
        instances,
        var_of,
        domains,
        actions,
        init,
        goal,
        invisible_tasks,
        index,
    })
}

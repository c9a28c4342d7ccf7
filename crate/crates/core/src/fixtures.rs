//! Shipped scenarios and a seeded generator of random grid problems, shared
//! by tests, benchmarks and the acceptance suite.

use std::collections::BTreeSet;
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{DomainTheory, GroundFluent, Reality, Value};
use crate::scenario::{parse_scenario, ScenarioDefinition};

pub const RESCUE_GRID: &str = include_str!("../fixtures/rescue_grid.cpp-scenario");
pub const RESCUE_GRID_DIVERGENT: &str = include_str!("../fixtures/rescue_grid_divergent.cpp-scenario");
pub const RESCUE_GRID_UNSOLVABLE: &str = include_str!("../fixtures/rescue_grid_unsolvable.cpp-scenario");
pub const RESCUE_GRID_EXOGENOUS_EVENTS: &str = include_str!("../fixtures/rescue_grid_exogenous.events");
pub const WAREHOUSE_LAZY: &str = include_str!("../fixtures/warehouse_lazy.cpp-scenario");

/// A named scenario with an optional events script.
#[derive(Clone, Copy, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub scenario: &'static str,
    pub events: Option<&'static str>,
}

pub const FIXTURES: &[Fixture] = &[
    Fixture { name: "rescue_grid", scenario: RESCUE_GRID, events: None },
    Fixture { name: "rescue_grid_divergent", scenario: RESCUE_GRID_DIVERGENT, events: None },
    Fixture {
        name: "rescue_grid_exogenous",
        scenario: RESCUE_GRID,
        events: Some(RESCUE_GRID_EXOGENOUS_EVENTS),
    },
    Fixture { name: "rescue_grid_unsolvable", scenario: RESCUE_GRID_UNSOLVABLE, events: None },
    Fixture { name: "warehouse_lazy", scenario: WAREHOUSE_LAZY, events: None },
];

pub fn rescue_grid() -> ScenarioDefinition {
    parse_scenario(RESCUE_GRID).expect("shipped fixture parses")
}

pub fn rescue_grid_theory() -> DomainTheory {
    rescue_grid().theory
}

fn cell(r: usize, c: usize) -> String {
    format!("loc_{r}_{c}")
}

/// Parameters of a grid world. Adjacency is symmetric minus `walls`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Start cell per robot.
    pub robots: Vec<(usize, usize)>,
    /// Cells where a photo can be taken.
    pub targets: Vec<(usize, usize)>,
    /// Blocked undirected edges, smaller cell first.
    pub walls: BTreeSet<((usize, usize), (usize, usize))>,
}

impl GridSpec {
    pub fn edges(&self) -> Vec<((usize, usize), (usize, usize))> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                for (nr, nc) in [(r, c + 1), (r + 1, c)] {
                    if nr < self.rows && nc < self.cols && !self.walls.contains(&((r, c), (nr, nc))) {
                        out.push(((r, c), (nr, nc)));
                        out.push(((nr, nc), (r, c)));
                    }
                }
            }
        }
        out
    }

    pub fn scenario_text(&self) -> String {
        let robots: Vec<String> = (1..=self.robots.len()).map(|i| format!("rbt{i}")).collect();
        let mut cells = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                cells.push(cell(r, c));
            }
        }
        let mut t = String::new();
        t.push_str("seed 0;\n");
        let _ = writeln!(t, "types {{ robot: {}; location: {}; }}", robots.join(" "), cells.join(" "));
        t.push_str("fluents { at(robot): location; photoTaken(location): bool; }\n");
        t.push_str("statics {\n  adjacent(location, location) {");
        for (a, b) in self.edges() {
            let _ = write!(t, " ({}, {})", cell(a.0, a.1), cell(b.0, b.1));
        }
        t.push_str(" }\n  target(location) {");
        for &(r, c) in &self.targets {
            let _ = write!(t, " ({})", cell(r, c));
        }
        t.push_str(" }\n}\n");
        t.push_str("capabilities { mobility camera }\n");
        let _ = writeln!(t, "services {{ {}: mobility camera; }}", robots[0]);
        t.push_str(
            "tasks {\n  move(?r: robot, ?from: location, ?to: location) {\n    requires mobility;\n    \
             pre at(?r) = ?from and adjacent(?from, ?to);\n    effect at(?r) := ?to;\n  }\n  \
             takephoto(?r: robot, ?l: location) {\n    requires camera;\n    \
             pre at(?r) = ?l and target(?l);\n    effect photoTaken(?l) := true;\n  }\n}\n",
        );
        t.push_str("init {");
        for (i, &(r, c)) in self.robots.iter().enumerate() {
            let _ = write!(t, " at({}) = {};", robots[i], cell(r, c));
        }
        t.push_str(" }\nprocess { empty }\n");
        t
    }

    pub fn theory(&self) -> DomainTheory {
        parse_scenario(&self.scenario_text())
            .expect("generated grid scenario is valid")
            .theory
    }
}

/// A random recovery problem: the gap between `phy` and `exp` is what the
/// planner has to close.
#[derive(Clone, Debug)]
pub struct GridProblem {
    pub spec: GridSpec,
    pub theory: DomainTheory,
    pub phy: Reality,
    pub exp: Reality,
}

/// Generates a grid of at most 5x5 cells with one or two robots, up to
/// three photo targets and a few walls, entirely determined by `seed`.
pub fn random_grid_problem(seed: u64) -> GridProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(2..=5);
    let cols = rng.random_range(2..=5);
    let pick = |rng: &mut ChaCha8Rng| (rng.random_range(0..rows), rng.random_range(0..cols));
    let robot_count = rng.random_range(1..=2);
    let robots: Vec<(usize, usize)> = (0..robot_count).map(|_| pick(&mut rng)).collect();
    let goals: Vec<(usize, usize)> = (0..robot_count).map(|_| pick(&mut rng)).collect();
    let mut targets = BTreeSet::new();
    for _ in 0..rng.random_range(0..=3) {
        targets.insert(pick(&mut rng));
    }
    let mut walls = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            for (nr, nc) in [(r, c + 1), (r + 1, c)] {
                if nr < rows && nc < cols && rng.random_bool(0.15) {
                    walls.insert(((r, c), (nr, nc)));
                }
            }
        }
    }
    let spec = GridSpec {
        rows,
        cols,
        robots,
        targets: targets.into_iter().collect(),
        walls,
    };
    let theory = spec.theory();
    let phy = theory.initial_reality().expect("total init");
    let mut exp = phy.clone();
    for (i, &(r, c)) in goals.iter().enumerate() {
        exp.set(GroundFluent::new("at", [format!("rbt{}", i + 1)]), Value::object(cell(r, c)));
    }
    for &(r, c) in &spec.targets {
        if rng.random_bool(0.6) {
            exp.set(GroundFluent::new("photoTaken", [cell(r, c)]), Value::Bool(true));
        }
    }
    GridProblem { spec, theory, phy, exp }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        for f in FIXTURES {
            parse_scenario(f.scenario).unwrap_or_else(|e| panic!("{}: {e}", f.name));
        }
    }

    #[test]
    fn rescue_grid_structure() {
        let def = rescue_grid();
        let crate::process::Process::Seq(steps) = &def.process else { panic!("expected a sequence") };
        assert_eq!(steps.len(), 2);
        assert_eq!(def.theory.static_relation("adjacent").unwrap().tuples.len(), 24);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = random_grid_problem(17);
        let b = random_grid_problem(17);
        assert_eq!(a.spec, b.spec);
        assert_eq!(a.exp, b.exp);
        assert!(a.spec.rows <= 5 && a.spec.cols <= 5 && a.spec.robots.len() <= 2);
    }
}

use std::collections::BTreeSet;

use super::lexer::{lex, Spanned, Tok};
use super::{MonitorMode, ScenarioDefinition, SyntaxError};
use crate::domain::{
    Assignment, DataType, EventSpec, FluentSpec, FluentTerm, Formula, GroundAssignment, Operand,
    Param, RangeType, ServiceSpec, StaticRelation, TaskSpec, Term, Value,
};
use crate::gateway::{
    Behavior, DiscretizationRule, Interval, ObservedAssignment, ObservedValue, ParticipantScript,
    Region, RegionRule, ScalarRule, ScriptRule,
};
use crate::process::{Process, TaskCall};

pub(crate) type PResult<T> = Result<T, SyntaxError>;

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(text: &str) -> PResult<Self> {
        let toks = lex(text).map_err(|e| SyntaxError {
            line: e.line,
            col: e.col,
            expected: vec![],
            found: e.found,
        })?;
        Ok(Parser { toks, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let here = &self.toks[self.pos];
        Err(SyntaxError {
            line: here.line,
            col: here.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: here.tok.to_string(),
        })
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.error(&[&tok.to_string()])
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(&[&format!("`{kw}`")])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(w) => {
                self.bump();
                Ok(w)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn var(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Var(w) => {
                self.bump();
                Ok(w)
            }
            _ => self.error(&["variable"]),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        match self.peek().clone() {
            Tok::Number(n) => match n.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    self.bump();
                    Ok(v)
                }
                _ => self.error(&["finite number"]),
            },
            _ => self.error(&["number"]),
        }
    }

    fn integer(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Number(n) => match n.parse::<u64>() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => self.error(&["non-negative integer"]),
            },
            _ => self.error(&["integer"]),
        }
    }

    /// `( item, item, ... )` with a parser for items.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            if !self.eat(&Tok::Comma) {
                return self.error(&["`,`", "`)`"]);
            }
        }
    }

    /// Identifiers up to (not including) `;` or `}`.
    fn idents_until_end(&mut self) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        while let Tok::Ident(_) = self.peek() {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    // ---- document ---------------------------------------------------------

    pub(crate) fn document(&mut self) -> PResult<ScenarioDefinition> {
        let mut def = ScenarioDefinition::default();
        let mut seed = None;
        let mut process = None;
        while self.peek() != &Tok::Eof {
            let kw = self.ident().or_else(|_| self.error(&["section keyword"]))?;
            match kw.as_str() {
                "seed" => {
                    seed = Some(self.integer()?);
                    self.expect(Tok::Semi)?;
                }
                "monitor" => {
                    def.monitor = if self.eat_kw("eager") {
                        MonitorMode::Eager
                    } else if self.eat_kw("lazy") {
                        MonitorMode::Lazy
                    } else {
                        return self.error(&["`eager`", "`lazy`"]);
                    };
                    self.expect(Tok::Semi)?;
                }
                "approval" => {
                    def.approval = if self.eat_kw("on") {
                        true
                    } else if self.eat_kw("off") {
                        false
                    } else {
                        return self.error(&["`on`", "`off`"]);
                    };
                    self.expect(Tok::Semi)?;
                }
                "adaptation_limit" => {
                    def.adaptation_limit = self.integer()? as u32;
                    self.expect(Tok::Semi)?;
                }
                "node_limit" => {
                    def.node_limit = self.integer()?;
                    self.expect(Tok::Semi)?;
                }
                "types" => self.block(|p| {
                    let name = p.ident()?;
                    p.expect(Tok::Colon)?;
                    let members = p.idents_until_end()?;
                    p.expect(Tok::Semi)?;
                    def.theory.data_types.push(DataType { name, members });
                    Ok(())
                })?,
                "fluents" => self.block(|p| {
                    let name = p.ident()?;
                    let params = if p.peek() == &Tok::LParen { p.list(Parser::ident)? } else { vec![] };
                    p.expect(Tok::Colon)?;
                    let range = if p.eat_kw("bool") { RangeType::Bool } else { RangeType::Type(p.ident()?) };
                    p.expect(Tok::Semi)?;
                    def.theory.fluents.push(FluentSpec { name, params, range });
                    Ok(())
                })?,
                "statics" => self.block(|p| {
                    let name = p.ident()?;
                    let params = p.list(Parser::ident)?;
                    let mut tuples = BTreeSet::new();
                    p.block(|p| {
                        tuples.insert(p.list(Parser::ident)?);
                        Ok(())
                    })?;
                    def.theory.statics.push(StaticRelation { name, params, tuples });
                    Ok(())
                })?,
                "capabilities" => {
                    self.expect(Tok::LBrace)?;
                    def.theory.capabilities.extend(self.idents_until_end()?);
                    self.expect(Tok::RBrace)?;
                }
                "services" => self.block(|p| {
                    let id = p.ident()?;
                    p.expect(Tok::Colon)?;
                    let provides = p.idents_until_end()?.into_iter().collect();
                    p.expect(Tok::Semi)?;
                    def.theory.services.push(ServiceSpec { id, provides });
                    Ok(())
                })?,
                "tasks" => self.block(|p| {
                    let t = p.task_decl()?;
                    def.theory.tasks.push(t);
                    Ok(())
                })?,
                "events" => self.block(|p| {
                    let name = p.ident()?;
                    let params = p.params()?;
                    let mut effects = Vec::new();
                    p.block(|p| {
                        p.expect_kw("effect")?;
                        effects.push(p.assignment()?);
                        p.expect(Tok::Semi)
                    })?;
                    def.theory.events.push(EventSpec { name, params, effects });
                    Ok(())
                })?,
                "relevant" => {
                    self.expect(Tok::LBrace)?;
                    let names = self.idents_until_end()?;
                    self.expect(Tok::RBrace)?;
                    def.theory.relevant.get_or_insert_with(BTreeSet::new).extend(names);
                }
                "init" => self.block(|p| {
                    let (fluent, args) = p.ground_fluent()?;
                    p.expect(Tok::Eq)?;
                    let value = p.ground_value()?;
                    p.expect(Tok::Semi)?;
                    def.theory.initial.push(GroundAssignment { fluent, args, value });
                    Ok(())
                })?,
                "process" => {
                    self.expect(Tok::LBrace)?;
                    process = Some(self.process()?);
                    self.expect(Tok::RBrace)?;
                }
                "scripts" => self.block(|p| {
                    let service = p.ident()?;
                    let mut rules = Vec::new();
                    p.block(|p| {
                        rules.push(p.script_rule()?);
                        Ok(())
                    })?;
                    def.scripts.push(ParticipantScript { service, rules });
                    Ok(())
                })?,
                "rules" => self.block(|p| {
                    let r = p.discretization_rule()?;
                    def.rules.push(r);
                    Ok(())
                })?,
                _ => {
                    self.pos -= 1;
                    return self.error(&[
                        "seed", "monitor", "approval", "adaptation_limit", "node_limit", "types",
                        "fluents", "statics", "capabilities", "services", "tasks", "events",
                        "relevant", "init", "process", "scripts", "rules",
                    ]);
                }
            }
        }
        def.seed = match seed {
            Some(s) => s,
            None => return self.error(&["`seed` declaration"]),
        };
        def.process = match process {
            Some(p) => p,
            None => return self.error(&["`process` block"]),
        };
        Ok(def)
    }

    /// `{ item* }`
    fn block(&mut self, mut item: impl FnMut(&mut Self) -> PResult<()>) -> PResult<()> {
        self.expect(Tok::LBrace)?;
        while !self.eat(&Tok::RBrace) {
            if self.peek() == &Tok::Eof {
                return self.error(&["`}`"]);
            }
            item(self)?;
        }
        Ok(())
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.list(|p| {
            let var = p.var()?;
            p.expect(Tok::Colon)?;
            Ok(Param { var, ty: p.ident()? })
        })
    }

    fn task_decl(&mut self) -> PResult<TaskSpec> {
        let name = self.ident()?;
        let params = self.params()?;
        let mut task = TaskSpec {
            name,
            params,
            requires: BTreeSet::new(),
            precondition: Formula::True,
            effects: vec![],
            recoverable: true,
        };
        self.block(|p| {
            if p.eat_kw("requires") {
                task.requires.extend(p.idents_until_end()?);
            } else if p.eat_kw("pre") {
                task.precondition = p.formula()?;
            } else if p.eat_kw("effect") {
                task.effects.push(p.assignment()?);
            } else if p.eat_kw("recoverable") {
                task.recoverable = if p.eat_kw("true") {
                    true
                } else if p.eat_kw("false") {
                    false
                } else {
                    return p.error(&["`true`", "`false`"]);
                };
            } else {
                return p.error(&["`requires`", "`pre`", "`effect`", "`recoverable`", "`}`"]);
            }
            p.expect(Tok::Semi)
        })?;
        Ok(task)
    }

    fn assignment(&mut self) -> PResult<Assignment> {
        let fluent = self.ident()?;
        let args = self.opt_args()?;
        self.expect(Tok::Assign)?;
        Ok(Assignment {
            target: FluentTerm { fluent, args },
            value: self.term()?,
        })
    }

    fn opt_args(&mut self) -> PResult<Vec<Term>> {
        if self.peek() == &Tok::LParen {
            self.list(Parser::term)
        } else {
            Ok(vec![])
        }
    }

    fn term(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Term::Bool(w == "true"))
            }
            Tok::Ident(w) => {
                self.bump();
                Ok(Term::Object(w))
            }
            _ => self.error(&["variable", "object", "`true`", "`false`"]),
        }
    }

    fn ground_fluent(&mut self) -> PResult<(String, Vec<String>)> {
        let fluent = self.ident()?;
        let args = if self.peek() == &Tok::LParen { self.list(Parser::ident)? } else { vec![] };
        Ok((fluent, args))
    }

    fn ground_value(&mut self) -> PResult<Value> {
        match self.ident()? {
            w if w == "true" => Ok(Value::Bool(true)),
            w if w == "false" => Ok(Value::Bool(false)),
            w => Ok(Value::Object(w)),
        }
    }

    fn observed(&mut self) -> PResult<ObservedAssignment> {
        let (fluent, args) = self.ground_fluent()?;
        self.expect(Tok::Assign)?;
        let source = self.ident()?;
        let value = if self.peek() == &Tok::LParen {
            ObservedValue::Reading {
                source,
                values: self.list(Parser::number)?,
            }
        } else {
            ObservedValue::Value(match source.as_str() {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                _ => Value::Object(source),
            })
        };
        Ok(ObservedAssignment { fluent, args, value })
    }

    fn script_rule(&mut self) -> PResult<ScriptRule> {
        self.expect_kw("on")?;
        let task = self.ident()?;
        let args = if self.peek() == &Tok::LParen {
            Some(self.list(|p| {
                if p.eat(&Tok::Underscore) {
                    Ok(None)
                } else {
                    p.ident().map(Some)
                }
            })?)
        } else {
            None
        };
        let nth = if self.eat_kw("nth") { Some(self.integer()? as u32) } else { None };
        self.expect(Tok::Colon)?;
        let behavior = if self.eat_kw("faithful") {
            self.expect(Tok::Semi)?;
            Behavior::Faithful
        } else {
            let fail = if self.eat_kw("fail") {
                true
            } else if self.eat_kw("outcome") {
                false
            } else {
                return self.error(&["`faithful`", "`outcome`", "`fail`"]);
            };
            let mut assigns = Vec::new();
            self.block(|p| {
                assigns.push(p.observed()?);
                p.expect(Tok::Semi)
            })?;
            if fail {
                Behavior::FailWith(assigns)
            } else {
                Behavior::Outcome(assigns)
            }
        };
        Ok(ScriptRule { task, args, nth, behavior })
    }

    fn discretization_rule(&mut self) -> PResult<DiscretizationRule> {
        if self.eat_kw("scalar") {
            let source = self.ident()?;
            self.expect(Tok::Arrow)?;
            let target = self.ident()?;
            let (min, max) = self.half_open()?;
            let mut intervals = Vec::new();
            self.block(|p| {
                let (lo, hi) = p.half_open()?;
                p.expect(Tok::Arrow)?;
                intervals.push(Interval { lo, hi, object: p.ident()? });
                p.expect(Tok::Semi)
            })?;
            Ok(DiscretizationRule::Scalar(ScalarRule { source, target, min, max, intervals }))
        } else if self.eat_kw("region") {
            let source = self.ident()?;
            self.expect(Tok::Arrow)?;
            let target = self.ident()?;
            self.expect_kw("else")?;
            let fallback = self.ident()?;
            let mut regions = Vec::new();
            self.block(|p| {
                let c = p.list(Parser::number)?;
                let [x0, y0, x1, y1] = c[..] else {
                    return p.error(&["four coordinates (x0, y0, x1, y1)"]);
                };
                p.expect(Tok::Arrow)?;
                regions.push(Region { x0, y0, x1, y1, object: p.ident()? });
                p.expect(Tok::Semi)
            })?;
            Ok(DiscretizationRule::Region(RegionRule { source, target, regions, fallback }))
        } else {
            self.error(&["`scalar`", "`region`"])
        }
    }

    /// `[lo, hi)`
    fn half_open(&mut self) -> PResult<(f64, f64)> {
        self.expect(Tok::LBracket)?;
        let lo = self.number()?;
        self.expect(Tok::Comma)?;
        let hi = self.number()?;
        self.expect(Tok::RParen)?;
        Ok((lo, hi))
    }

    // ---- process ----------------------------------------------------------

    pub(crate) fn process(&mut self) -> PResult<Process> {
        if self.eat_kw("empty") {
            return Ok(Process::Empty);
        }
        if self.is_kw("seq") && self.peek_at(1) == &Tok::LBrace {
            self.bump();
            return Ok(Process::Seq(self.process_list()?));
        }
        if self.is_kw("par") && self.peek_at(1) == &Tok::LBrace {
            self.bump();
            return Ok(Process::Par(self.process_list()?));
        }
        if self.eat_kw("if") {
            let cond = self.formula()?;
            self.expect_kw("then")?;
            let then = Box::new(self.process()?);
            self.expect_kw("else")?;
            let otherwise = Box::new(self.process()?);
            return Ok(Process::Xor { cond, then, otherwise });
        }
        if self.eat_kw("while") {
            let cond = self.formula()?;
            self.expect_kw("do")?;
            return Ok(Process::Loop { cond, body: Box::new(self.process()?) });
        }
        match self.peek() {
            Tok::Ident(_) => {
                let task = self.ident()?;
                let args = self.list(Parser::ident)?;
                Ok(Process::Task(TaskCall { task, args }))
            }
            _ => self.error(&["`empty`", "`seq`", "`par`", "`if`", "`while`", "task call"]),
        }
    }

    fn process_list(&mut self) -> PResult<Vec<Process>> {
        let mut items = Vec::new();
        self.block(|p| {
            items.push(p.process()?);
            Ok(())
        })?;
        Ok(items)
    }

    pub(crate) fn task_call(&mut self) -> PResult<TaskCall> {
        let task = self.ident()?;
        let args = self.list(Parser::ident)?;
        Ok(TaskCall { task, args })
    }

    pub(crate) fn at_eof(&self) -> bool {
        self.peek() == &Tok::Eof
    }

    pub(crate) fn expect_eof(&self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    pub(crate) fn expect_colon(&mut self) -> PResult<()> {
        self.expect(Tok::Colon)
    }

    pub(crate) fn expect_semi(&mut self) -> PResult<()> {
        self.expect(Tok::Semi)
    }

    pub(crate) fn keyword(&mut self) -> PResult<String> {
        self.ident()
    }

    pub(crate) fn integer_value(&mut self) -> PResult<u64> {
        self.integer()
    }

    // ---- formulas ---------------------------------------------------------

    pub(crate) fn formula(&mut self) -> PResult<Formula> {
        let first = self.conjunction()?;
        if !self.is_kw("or") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_kw("or") {
            items.push(self.conjunction()?);
        }
        Ok(Formula::Or(items))
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let first = self.unary()?;
        if !self.is_kw("and") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_kw("and") {
            items.push(self.unary()?);
        }
        Ok(Formula::And(items))
    }

    fn unary(&mut self) -> PResult<Formula> {
        if self.eat_kw("not") {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::LParen) {
            let f = self.formula()?;
            self.expect(Tok::RParen)?;
            return Ok(f);
        }
        if self.eat_kw("true") {
            return Ok(Formula::True);
        }
        if self.eat_kw("false") {
            return Ok(Formula::False);
        }
        for (kw, universal) in [("forall", true), ("exists", false)] {
            if self.eat_kw(kw) {
                let var = self.var()?;
                self.expect(Tok::Colon)?;
                let ty = self.ident()?;
                self.expect(Tok::LParen)?;
                let body = Box::new(self.formula()?);
                self.expect(Tok::RParen)?;
                return Ok(if universal {
                    Formula::Forall(var, ty, body)
                } else {
                    Formula::Exists(var, ty, body)
                });
            }
        }
        let name = match self.peek() {
            Tok::Ident(_) => self.ident()?,
            _ => return self.error(&["formula"]),
        };
        let args = self.opt_args()?;
        let lhs = FluentTerm { fluent: name, args };
        if self.eat(&Tok::Eq) {
            Ok(Formula::Eq(lhs, self.operand()?))
        } else if self.eat(&Tok::Neq) {
            Ok(Formula::Neq(lhs, self.operand()?))
        } else {
            Ok(Formula::Static(lhs.fluent, lhs.args))
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        if let (Tok::Ident(w), Tok::LParen) = (self.peek().clone(), self.peek_at(1).clone()) {
            if w != "true" && w != "false" {
                self.bump();
                let args = self.list(Parser::term)?;
                return Ok(Operand::Fluent(FluentTerm { fluent: w, args }));
            }
        }
        Ok(Operand::Term(self.term()?))
    }

    pub(crate) fn event_call(&mut self) -> PResult<(String, Vec<String>)> {
        let name = self.ident()?;
        let args = if self.peek() == &Tok::LParen { self.list(Parser::ident)? } else { vec![] };
        Ok((name, args))
    }
}

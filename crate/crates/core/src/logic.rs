//! Clauses, logic programs and their bottom-up evaluation.
//!
//! Programs are non-recursive, so a single pass over the clauses reaches the
//! fixpoint. Each clause is evaluated as a nested-loop join over per-predicate
//! hash indexes keyed by the bound argument positions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::kb::{Constant, Fact, KnowledgeBase, Origin, Predicate};
use crate::syntax::{self, RawAtom, RawTerm, Reader, Statement, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid clause `{clause}`: {reason}")]
    InvalidClause { clause: String, reason: String },
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
}

impl From<SyntaxError> for LogicError {
    fn from(e: SyntaxError) -> Self {
        LogicError::Syntax {
            line: e.pos.line,
            column: e.pos.column,
            message: e.message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(Arc<str>);

const VAR_NAMES: [&str; 8] = ["X", "Y", "Z", "W", "V", "U", "T", "S"];

impl Variable {
    pub fn new(name: &str) -> Result<Self, LogicError> {
        if syntax::is_upper_ident(name) {
            Ok(Self(name.into()))
        } else {
            Err(LogicError::InvalidClause {
                clause: name.to_string(),
                reason: "variables start with an uppercase letter".into(),
            })
        }
    }

    /// The `i`-th variable of the canonical naming `X, Y, Z, W, ...`.
    pub fn canonical(i: usize) -> Self {
        match VAR_NAMES.get(i) {
            Some(n) => Self((*n).into()),
            None => Self(format!("V{i}").into()),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Variable),
    Const(Constant),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => v.fmt(f),
            Term::Const(c) => c.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub predicate: Arc<str>,
    pub args: Vec<Term>,
    pub negated: bool,
}

impl Literal {
    pub fn positive(predicate: impl Into<Arc<str>>, args: Vec<Term>) -> Self {
        Self {
            predicate: predicate.into(),
            args,
            negated: false,
        }
    }

    /// A positive literal whose arguments are all variables.
    pub fn with_vars(predicate: impl Into<Arc<str>>, vars: &[Variable]) -> Self {
        Self::positive(predicate, vars.iter().cloned().map(Term::Var).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("\\+")?;
        }
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                a.fmt(f)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Connective {
    Conjunction,
    Disjunction,
}

/// `head :- body`, with the body read as a conjunction or a disjunction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    head: Literal,
    body: Vec<Literal>,
    connective: Connective,
}

impl Clause {
    pub fn new(head: Literal, body: Vec<Literal>, connective: Connective) -> Result<Self, LogicError> {
        let clause = Self {
            head,
            body,
            connective,
        };
        clause.validate()?;
        Ok(clause)
    }

    fn invalid(&self, reason: impl Into<String>) -> LogicError {
        LogicError::InvalidClause {
            clause: self.to_string(),
            reason: reason.into(),
        }
    }

    fn validate(&self) -> Result<(), LogicError> {
        if self.head.negated {
            return Err(self.invalid("the head must be positive"));
        }
        if self.body.is_empty() {
            return Err(self.invalid("the body must not be empty"));
        }
        let positive_vars: HashSet<&Variable> = self
            .body
            .iter()
            .filter(|l| !l.negated)
            .flat_map(|l| l.variables())
            .collect();
        if let Some(v) = self.head.variables().find(|v| !positive_vars.contains(v)) {
            return Err(self.invalid(format!("head variable {v} does not occur in a positive body literal")));
        }
        for lit in self.body.iter().filter(|l| l.negated) {
            if let Some(v) = lit.variables().find(|v| !positive_vars.contains(v)) {
                return Err(self.invalid(format!("variable {v} of a negated literal is unbound")));
            }
        }
        if self.connective == Connective::Disjunction {
            let first = &self.body[0].args;
            for lit in &self.body {
                if lit.negated {
                    return Err(self.invalid("disjunctive bodies must be negation free"));
                }
                if &lit.args != first || lit.args.iter().any(|t| matches!(t, Term::Const(_))) {
                    return Err(self.invalid("disjuncts must share one variable tuple"));
                }
            }
        }
        Ok(())
    }

    pub fn head(&self) -> &Literal {
        &self.head
    }

    pub fn body(&self) -> &[Literal] {
        &self.body
    }

    pub fn connective(&self) -> Connective {
        self.connective
    }

    /// Returns the clause with its head predicate renamed.
    pub fn with_head_name(&self, name: impl Into<Arc<str>>) -> Self {
        let mut c = self.clone();
        c.head.predicate = name.into();
        c
    }

    /// Distinct body `(name, arity)` pairs.
    pub fn body_signatures(&self) -> BTreeSet<(Arc<str>, usize)> {
        self.body
            .iter()
            .map(|l| (l.predicate.clone(), l.arity()))
            .collect()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        let sep = match self.connective {
            Connective::Conjunction => ",",
            Connective::Disjunction => ";",
        };
        for (i, l) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(sep)?;
            }
            l.fmt(f)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Indexes and evaluation
// ---------------------------------------------------------------------------

const MAX_INDEXED_ARITY: usize = 8;

#[derive(Debug)]
struct Relation {
    tuples: Vec<Vec<Constant>>,
    members: HashSet<Vec<Constant>>,
    by_mask: Vec<OnceLock<HashMap<Vec<Constant>, Vec<u32>>>>,
}

impl Relation {
    fn new(arity: usize) -> Self {
        let masks = if arity <= MAX_INDEXED_ARITY { 1 << arity } else { 0 };
        Self {
            tuples: Vec::new(),
            members: HashSet::new(),
            by_mask: (0..masks).map(|_| OnceLock::new()).collect(),
        }
    }

    fn index(&self, mask: usize) -> Option<&HashMap<Vec<Constant>, Vec<u32>>> {
        let cell = self.by_mask.get(mask)?;
        Some(cell.get_or_init(|| {
            let mut map: HashMap<Vec<Constant>, Vec<u32>> = HashMap::new();
            for (i, t) in self.tuples.iter().enumerate() {
                let key = project(t, mask);
                map.entry(key).or_default().push(i as u32);
            }
            map
        }))
    }
}

fn project(t: &[Constant], mask: usize) -> Vec<Constant> {
    t.iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, c)| c.clone())
        .collect()
}

/// Facts grouped per predicate with lazily built hash indexes on bound
/// argument positions. Safe to share across threads.
#[derive(Debug, Default)]
pub struct FactIndex {
    relations: HashMap<(Arc<str>, usize), Relation>,
}

impl FactIndex {
    pub fn new<'a, I: IntoIterator<Item = &'a Fact>>(facts: I) -> Self {
        let mut index = Self::default();
        for f in facts {
            index.add(f);
        }
        index
    }

    /// Also registers predicates without facts, so they count as known.
    pub fn with_vocabulary<'a, I, P>(facts: I, vocabulary: P) -> Self
    where
        I: IntoIterator<Item = &'a Fact>,
        P: IntoIterator<Item = &'a Predicate>,
    {
        let mut index = Self::new(facts);
        for p in vocabulary {
            index
                .relations
                .entry((p.name.clone(), p.arity))
                .or_insert_with(|| Relation::new(p.arity));
        }
        index
    }

    fn add(&mut self, fact: &Fact) {
        let rel = self
            .relations
            .entry((fact.predicate.clone(), fact.arity()))
            .or_insert_with(|| Relation::new(fact.arity()));
        if rel.members.insert(fact.args.clone()) {
            rel.tuples.push(fact.args.clone());
        }
    }

    pub fn knows(&self, name: &str, arity: usize) -> bool {
        self.relations.contains_key(&(Arc::from(name), arity))
    }

    fn relation(&self, name: &Arc<str>, arity: usize) -> Option<&Relation> {
        self.relations.get(&(name.clone(), arity))
    }

    pub fn len_of(&self, name: &str, arity: usize) -> usize {
        self.relations
            .get(&(Arc::from(name), arity))
            .map_or(0, |r| r.tuples.len())
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Const(Constant),
}

struct Step<'a> {
    relation: Option<&'a Relation>,
    slots: Vec<Slot>,
    negated: bool,
}

/// A conjunctive body compiled against an index.
struct Plan<'a> {
    steps: Vec<Step<'a>>,
    var_count: usize,
}

fn slots_of(lit: &Literal, vars: &mut Vec<Variable>) -> Vec<Slot> {
    lit.args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Slot::Const(c.clone()),
            Term::Var(v) => Slot::Var(match vars.iter().position(|x| x == v) {
                Some(i) => i,
                None => {
                    vars.push(v.clone());
                    vars.len() - 1
                }
            }),
        })
        .collect()
}

impl<'a> Plan<'a> {
    /// Variable slots are numbered by first appearance in `body` order,
    /// independently of the join order chosen.
    fn compile(body: &[Literal], index: &'a FactIndex) -> (Self, Vec<Variable>) {
        let mut vars = Vec::new();
        let mut raw: Vec<(usize, Vec<Slot>)> = body
            .iter()
            .enumerate()
            .map(|(i, l)| (i, slots_of(l, &mut vars)))
            .collect();

        let mut bound = vec![false; vars.len()];
        let mut steps = Vec::with_capacity(body.len());
        // Greedy join order: most bound arguments first, then smallest relation.
        let (mut positives, negatives): (Vec<_>, Vec<_>) =
            raw.drain(..).partition(|(i, _)| !body[*i].negated);
        while !positives.is_empty() {
            let best = positives
                .iter()
                .enumerate()
                .max_by_key(|(_, (i, slots))| {
                    let b = slots
                        .iter()
                        .filter(|s| match s {
                            Slot::Const(_) => true,
                            Slot::Var(v) => bound[*v],
                        })
                        .count();
                    let size = index.len_of(&body[*i].predicate, body[*i].arity());
                    (b, std::cmp::Reverse(size), std::cmp::Reverse(*i))
                })
                .map(|(k, _)| k)
                .unwrap();
            let (i, slots) = positives.remove(best);
            for s in &slots {
                if let Slot::Var(v) = s {
                    bound[*v] = true;
                }
            }
            steps.push(Step {
                relation: index.relation(&body[i].predicate, body[i].arity()),
                slots,
                negated: false,
            });
        }
        for (i, slots) in negatives {
            steps.push(Step {
                relation: index.relation(&body[i].predicate, body[i].arity()),
                slots,
                negated: true,
            });
        }
        (
            Plan {
                steps,
                var_count: vars.len(),
            },
            vars,
        )
    }

    fn run(&self, emit: &mut dyn FnMut(&[Option<Constant>])) {
        let mut binding = vec![None; self.var_count];
        self.join(0, &mut binding, emit);
    }

    fn join(&self, depth: usize, binding: &mut Vec<Option<Constant>>, emit: &mut dyn FnMut(&[Option<Constant>])) {
        let Some(step) = self.steps.get(depth) else {
            emit(binding);
            return;
        };
        let value = |s: &Slot, binding: &[Option<Constant>]| -> Option<Constant> {
            match s {
                Slot::Const(c) => Some(c.clone()),
                Slot::Var(v) => binding[*v].clone(),
            }
        };
        if step.negated {
            let tuple: Vec<Constant> = step
                .slots
                .iter()
                .map(|s| value(s, binding).expect("negated literal is safe"))
                .collect();
            let present = step.relation.is_some_and(|r| r.members.contains(&tuple));
            if !present {
                self.join(depth + 1, binding, emit);
            }
            return;
        }
        let Some(rel) = step.relation else {
            return;
        };
        let mut mask = 0usize;
        let mut key = Vec::new();
        for (i, s) in step.slots.iter().enumerate() {
            if let Some(c) = value(s, binding) {
                mask |= 1 << i.min(usize::BITS as usize - 1);
                key.push(c);
            }
        }
        let arity = step.slots.len();
        if key.len() == arity {
            if rel.members.contains(&key) {
                self.join(depth + 1, binding, emit);
            }
            return;
        }
        let mut visit = |t: &Vec<Constant>, binding: &mut Vec<Option<Constant>>| {
            let mut newly = Vec::new();
            let mut ok = true;
            for (s, c) in step.slots.iter().zip(t) {
                match s {
                    Slot::Const(k) => {
                        if k != c {
                            ok = false;
                            break;
                        }
                    }
                    Slot::Var(v) => match &binding[*v] {
                        Some(b) => {
                            if b != c {
                                ok = false;
                                break;
                            }
                        }
                        None => {
                            binding[*v] = Some(c.clone());
                            newly.push(*v);
                        }
                    },
                }
            }
            if ok {
                self.join(depth + 1, binding, emit);
            }
            for v in newly {
                binding[v] = None;
            }
        };
        if mask != 0 {
            if let Some(idx) = rel.index(mask) {
                if let Some(rows) = idx.get(&key) {
                    for &r in rows {
                        visit(&rel.tuples[r as usize], binding);
                    }
                }
                return;
            }
        }
        for t in &rel.tuples {
            visit(t, binding);
        }
    }
}

/// Distinct satisfying substitutions of a body, as tuples over the body
/// variables in first-appearance order.
pub fn body_bindings(body: &[Literal], connective: Connective, index: &FactIndex) -> BTreeSet<Vec<Constant>> {
    let mut out = BTreeSet::new();
    let mut collect = |b: &[Option<Constant>]| {
        out.insert(b.iter().map(|c| c.clone().expect("all variables bound")).collect());
    };
    match connective {
        Connective::Conjunction => {
            let (plan, _) = Plan::compile(body, index);
            plan.run(&mut collect);
        }
        Connective::Disjunction => {
            for lit in body {
                let (plan, _) = Plan::compile(std::slice::from_ref(lit), index);
                plan.run(&mut collect);
            }
        }
    }
    out
}

/// Every ground head instance derivable from `facts` by one clause.
pub fn ground_consequences(clause: &Clause, facts: &FactIndex) -> BTreeSet<Fact> {
    let mut out = BTreeSet::new();
    let disjuncts: Vec<&[Literal]> = match clause.connective {
        Connective::Conjunction => vec![&clause.body[..]],
        Connective::Disjunction => clause.body.iter().map(std::slice::from_ref).collect(),
    };
    for body in disjuncts {
        let (plan, vars) = Plan::compile(body, facts);
        let head: Vec<Slot> = clause
            .head
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Slot::Const(c.clone()),
                Term::Var(v) => Slot::Var(vars.iter().position(|x| x == v).expect("range restricted")),
            })
            .collect();
        plan.run(&mut |b| {
            let args = head
                .iter()
                .map(|s| match s {
                    Slot::Const(c) => c.clone(),
                    Slot::Var(v) => b[*v].clone().expect("bound"),
                })
                .collect();
            out.insert(Fact::from_parts(clause.head.predicate.clone(), args));
        });
    }
    out
}

/// Whether everything `specific` derives is also derived by `general`,
/// comparing argument tuples so that head names do not matter.
pub fn clause_covers(general: &Clause, specific: &Clause, facts: &FactIndex) -> bool {
    if general.head.arity() != specific.head.arity() {
        return false;
    }
    let g: HashSet<Vec<Constant>> = ground_consequences(general, facts)
        .into_iter()
        .map(|f| f.args)
        .collect();
    ground_consequences(specific, facts)
        .iter()
        .all(|f| g.contains(&f.args))
}

// ---------------------------------------------------------------------------
// Programs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Encoder,
    Decoder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicProgram {
    pub clauses: Vec<Clause>,
    pub direction: Direction,
}

impl LogicProgram {
    pub fn new(direction: Direction) -> Self {
        Self {
            clauses: Vec::new(),
            direction,
        }
    }

    pub fn head_signatures(&self) -> BTreeSet<(Arc<str>, usize)> {
        self.clauses
            .iter()
            .map(|c| (c.head.predicate.clone(), c.head.arity()))
            .collect()
    }

    pub fn body_signatures(&self) -> BTreeSet<(Arc<str>, usize)> {
        self.clauses.iter().flat_map(|c| c.body_signatures()).collect()
    }

    /// Union of the consequences of every clause, after checking that each
    /// body predicate is known to the index.
    pub fn apply(&self, facts: &FactIndex) -> Result<BTreeSet<Fact>, LogicError> {
        for (name, arity) in self.body_signatures() {
            if !facts.knows(&name, arity) {
                return Err(LogicError::UnknownPredicate(format!("{name}/{arity}")));
            }
        }
        Ok(self.consequences(facts))
    }

    fn consequences(&self, facts: &FactIndex) -> BTreeSet<Fact> {
        let mut out = BTreeSet::new();
        for c in &self.clauses {
            out.extend(ground_consequences(c, facts));
        }
        out
    }
}

/// Applies a non-recursive program in one bottom-up pass.
pub fn apply_program(program: &LogicProgram, facts: &FactIndex) -> Result<BTreeSet<Fact>, LogicError> {
    program.apply(facts)
}

/// An encoder/decoder pair with its vocabularies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alp {
    pub encoder: LogicProgram,
    pub decoder: LogicProgram,
    pub latent_vocabulary: BTreeSet<Predicate>,
    pub input_vocabulary: BTreeSet<Predicate>,
    pub background_vocabulary: BTreeSet<Predicate>,
}

impl Alp {
    /// Builds and validates an ALP. The latent vocabulary is the set of
    /// encoder head predicates; `input` may list predicates beyond those the
    /// clauses mention.
    pub fn new(
        encoder: Vec<Clause>,
        decoder: Vec<Clause>,
        input: BTreeSet<Predicate>,
        background: BTreeSet<Predicate>,
    ) -> Result<Self, LogicError> {
        let sig = |p: &Predicate| (p.name.clone(), p.arity);
        let mut input = input;
        let latent: BTreeSet<Predicate> = encoder
            .iter()
            .map(|c| Predicate {
                name: c.head.predicate.clone(),
                arity: c.head.arity(),
                origin: Origin::Latent,
            })
            .collect();
        let background_sigs: BTreeSet<_> = background.iter().map(sig).collect();
        let latent_sigs: BTreeSet<_> = latent.iter().map(sig).collect();
        let latent_names: BTreeSet<&Arc<str>> = latent.iter().map(|p| &p.name).collect();
        for c in &encoder {
            for l in &c.body {
                if latent_names.contains(&l.predicate) {
                    return Err(LogicError::InvalidProgram(format!(
                        "encoder clause `{c}` uses latent predicate {} in its body",
                        l.predicate
                    )));
                }
                let s = (l.predicate.clone(), l.arity());
                if !background_sigs.contains(&s) {
                    input.insert(Predicate {
                        name: s.0,
                        arity: s.1,
                        origin: Origin::Input,
                    });
                }
            }
        }
        for c in &decoder {
            if latent_names.contains(&c.head.predicate) {
                return Err(LogicError::InvalidProgram(format!(
                    "decoder clause `{c}` has a latent head"
                )));
            }
            if background_sigs.contains(&(c.head.predicate.clone(), c.head.arity())) {
                return Err(LogicError::InvalidProgram(format!(
                    "decoder clause `{c}` has a background head"
                )));
            }
            for l in &c.body {
                if !latent_sigs.contains(&(l.predicate.clone(), l.arity())) {
                    return Err(LogicError::InvalidProgram(format!(
                        "decoder clause `{c}` uses non-latent predicate {}/{} in its body",
                        l.predicate,
                        l.arity()
                    )));
                }
            }
            input.insert(Predicate {
                name: c.head.predicate.clone(),
                arity: c.head.arity(),
                origin: Origin::Input,
            });
        }
        if let Some(p) = input.iter().find(|p| latent_names.contains(&p.name)) {
            return Err(LogicError::InvalidProgram(format!(
                "latent predicate {p} collides with an input predicate"
            )));
        }
        Ok(Self {
            encoder: LogicProgram {
                clauses: encoder,
                direction: Direction::Encoder,
            },
            decoder: LogicProgram {
                clauses: decoder,
                direction: Direction::Decoder,
            },
            latent_vocabulary: latent,
            input_vocabulary: input,
            background_vocabulary: background,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), BTreeSet::new(), BTreeSet::new()).expect("empty ALP is valid")
    }

    /// Latent facts for a knowledge base (background facts included as encoder input).
    pub fn encode(&self, kb: &KnowledgeBase) -> BTreeSet<Fact> {
        let index = FactIndex::new(kb.facts().iter().chain(kb.background().iter()));
        self.encoder.consequences(&index)
    }

    pub fn decode(&self, latent: &BTreeSet<Fact>) -> BTreeSet<Fact> {
        let index = FactIndex::new(latent);
        self.decoder.consequences(&index)
    }

    /// `D(E(KB))` restricted to non-background predicates.
    pub fn reconstruct(&self, kb: &KnowledgeBase) -> BTreeSet<Fact> {
        let mut out = self.decode(&self.encode(kb));
        out.retain(|f| {
            kb.predicate(&f.predicate)
                .is_none_or(|p| p.origin != Origin::Background)
        });
        out
    }

    pub fn parse(text: &str) -> Result<Self, LogicError> {
        let mut reader = Reader::new(text)?;
        let mut section: Option<Direction> = None;
        let mut encoder = Vec::new();
        let mut decoder = Vec::new();
        let mut input = BTreeSet::new();
        let mut background = BTreeSet::new();
        while let Some(stmt) = reader.next_statement()? {
            match stmt {
                Statement::Directive { name, args, pos } => match name.as_str() {
                    "encoder" | "decoder" if args.is_empty() => {
                        section = Some(if name == "encoder" {
                            Direction::Encoder
                        } else {
                            Direction::Decoder
                        });
                    }
                    "input" | "background" => {
                        let (n, arity, _) = syntax::parse_signature(&args, pos)?;
                        let origin = if name == "input" {
                            Origin::Input
                        } else {
                            Origin::Background
                        };
                        let p = Predicate {
                            name: n.into(),
                            arity,
                            origin,
                        };
                        if origin == Origin::Input {
                            input.insert(p);
                        } else {
                            background.insert(p);
                        }
                    }
                    other => {
                        return Err(SyntaxError {
                            pos,
                            message: format!("unknown directive `#{other}`"),
                        }
                        .into())
                    }
                },
                Statement::Clause {
                    head,
                    body,
                    disjunctive,
                } => {
                    let pos = head.pos;
                    let Some(dir) = section else {
                        return Err(SyntaxError {
                            pos,
                            message: "clause outside an `#encoder` or `#decoder` section".into(),
                        }
                        .into());
                    };
                    if body.is_empty() {
                        return Err(SyntaxError {
                            pos,
                            message: "program clauses need a body".into(),
                        }
                        .into());
                    }
                    let head = literal_from_raw(head)?;
                    let body = body
                        .into_iter()
                        .map(literal_from_raw)
                        .collect::<Result<Vec<_>, _>>()?;
                    let connective = if disjunctive {
                        Connective::Disjunction
                    } else {
                        Connective::Conjunction
                    };
                    let clause = Clause::new(head, body, connective)?;
                    match dir {
                        Direction::Encoder => encoder.push(clause),
                        Direction::Decoder => decoder.push(clause),
                    }
                }
            }
        }
        Alp::new(encoder, decoder, input, background)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.input_vocabulary {
            out.push_str(&format!("#input {}/{}\n", p.name, p.arity));
        }
        for p in &self.background_vocabulary {
            out.push_str(&format!("#background {}/{}\n", p.name, p.arity));
        }
        out.push_str("#encoder\n");
        for c in &self.encoder.clauses {
            out.push_str(&format!("{c}.\n"));
        }
        out.push_str("#decoder\n");
        for c in &self.decoder.clauses {
            out.push_str(&format!("{c}.\n"));
        }
        out
    }
}

fn literal_from_raw(atom: RawAtom) -> Result<Literal, LogicError> {
    let args = atom
        .args
        .into_iter()
        .map(|(t, _)| match t {
            RawTerm::Const(c) => Constant::new(&c)
                .map(Term::Const)
                .map_err(|e| LogicError::InvalidClause {
                    clause: c,
                    reason: e.to_string(),
                }),
            RawTerm::Var(v) => Variable::new(&v).map(Term::Var),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Literal {
        predicate: atom.name.into(),
        args,
        negated: atom.negated,
    })
}

/// Missing and false reconstructions of an ALP on a knowledge base.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LossBreakdown {
    pub missing: BTreeSet<Fact>,
    pub false_positive: BTreeSet<Fact>,
}

impl LossBreakdown {
    pub fn loss(&self) -> usize {
        self.missing.len() + self.false_positive.len()
    }
}

pub fn loss_breakdown(alp: &Alp, kb: &KnowledgeBase) -> LossBreakdown {
    let recon = alp.reconstruct(kb);
    LossBreakdown {
        missing: kb.facts().difference(&recon).cloned().collect(),
        false_positive: recon.difference(kb.facts()).cloned().collect(),
    }
}

/// `|D(E(KB)) Δ KB|` over the non-background facts.
pub fn reconstruction_loss(alp: &Alp, kb: &KnowledgeBase) -> usize {
    let recon = alp.reconstruct(kb);
    recon.symmetric_difference(kb.facts()).count()
}

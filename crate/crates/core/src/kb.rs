//! Knowledge bases: ground facts over a vocabulary of predicates and constants.
//!
//! Fact files are line oriented:
//!
//! ```text
//! % comment
//! #pred father/2
//! #mode father(+,-)
//! #background edge/2
//! father(vader,luke).
//! ```
//!
//! A predicate name carries exactly one arity within a knowledge base. Facts
//! of predicates declared with `#background` are kept apart from the
//! reconstruction targets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::syntax::{self, Pos, RawTerm, Reader, Statement, SyntaxError, Tok};
use crate::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: predicate `{name}` has arity {expected}, found {found} arguments")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: variable `{name}` is not allowed in a fact")]
    VariableInFact {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("predicate `{name}` is declared both as {first} and as {second}")]
    OriginConflict {
        name: String,
        first: Origin,
        second: Origin,
    },
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("Herbrand base would hold {size} atoms, above the ceiling of {ceiling}")]
    Capacity { size: String, ceiling: usize },
    #[error("the vocabulary has no non-background predicates")]
    EmptyVocabulary,
}

impl From<SyntaxError> for KbError {
    fn from(e: SyntaxError) -> Self {
        KbError::Syntax {
            line: e.pos.line,
            column: e.pos.column,
            message: e.message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Input,
    Latent,
    Background,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Input => "input",
            Origin::Latent => "latent",
            Origin::Background => "background",
        })
    }
}

/// A predicate symbol. Identity (equality, ordering, hashing) is the
/// `(name, arity)` pair; the origin is descriptive.
#[derive(Debug, Clone)]
pub struct Predicate {
    pub name: Arc<str>,
    pub arity: usize,
    pub origin: Origin,
}

impl Predicate {
    pub fn new(name: &str, arity: usize, origin: Origin) -> Result<Self, KbError> {
        if !syntax::is_lower_ident(name) {
            return Err(KbError::InvalidIdentifier(name.to_string()));
        }
        Ok(Self {
            name: name.into(),
            arity,
            origin,
        })
    }

    fn key(&self) -> (&str, usize) {
        (&self.name, self.arity)
    }
}

impl PartialEq for Predicate {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Predicate {}

impl PartialOrd for Predicate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Predicate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl std::hash::Hash for Predicate {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// An entity symbol; lowercase identifier or unsigned integer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant(Arc<str>);

impl Constant {
    pub fn new(symbol: &str) -> Result<Self, KbError> {
        let numeric = !symbol.is_empty() && symbol.chars().all(|c| c.is_ascii_digit());
        if syntax::is_lower_ident(symbol) || numeric {
            Ok(Self(symbol.into()))
        } else {
            Err(KbError::InvalidIdentifier(symbol.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A ground atom. Ordering is by predicate name, then argument tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub predicate: Arc<str>,
    pub args: Vec<Constant>,
}

impl Fact {
    /// Builds a fact from already validated parts.
    pub fn from_parts(predicate: Arc<str>, args: Vec<Constant>) -> Self {
        Self { predicate, args }
    }

    pub fn new(predicate: &str, args: &[&str]) -> Result<Self, KbError> {
        if !syntax::is_lower_ident(predicate) {
            return Err(KbError::InvalidIdentifier(predicate.to_string()));
        }
        let args = args
            .iter()
            .map(|a| Constant::new(a))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            predicate: predicate.into(),
            args,
        })
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                f.write_str(a.as_str())?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl FromStr for Fact {
    type Err = KbError;

    /// Parses a single fact, with or without the terminating period.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let text = if text.ends_with('.') {
            text.to_string()
        } else {
            format!("{text}.")
        };
        let kb = KnowledgeBase::parse(&text)?;
        let mut facts = kb.facts.into_iter();
        match (facts.next(), facts.next()) {
            (Some(f), None) => Ok(f),
            _ => Err(KbError::Syntax {
                line: 1,
                column: 1,
                message: "expected exactly one fact".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// `+`: bound to a variable already in the body.
    Plus,
    /// `-`: introduces a fresh variable.
    Minus,
    /// `?`: either.
    Maybe,
}

impl Mode {
    fn symbol(self) -> char {
        match self {
            Mode::Plus => '+',
            Mode::Minus => '-',
            Mode::Maybe => '?',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeDeclaration {
    pub predicate: Predicate,
    pub slots: Vec<Mode>,
}

impl ModeDeclaration {
    /// The default declaration: every slot `?`.
    pub fn open(predicate: Predicate) -> Self {
        let slots = vec![Mode::Maybe; predicate.arity];
        Self { predicate, slots }
    }
}

impl fmt::Display for ModeDeclaration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate.name)?;
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", s.symbol())?;
        }
        f.write_str(")")
    }
}

/// A knowledge base: set-semantics facts plus background facts, the
/// predicate vocabulary, the constants and optional mode declarations.
///
/// Immutable once built; share it freely across threads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    facts: BTreeSet<Fact>,
    background: BTreeSet<Fact>,
    predicates: BTreeMap<Arc<str>, Predicate>,
    constants: BTreeSet<Constant>,
    modes: BTreeMap<Arc<str>, ModeDeclaration>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a fact file.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut reader = Reader::new(text)?;
        let mut kb = KnowledgeBase::new();
        // Declared origins are resolved after reading so that a `#background`
        // directive may follow the facts it classifies.
        let mut declared: BTreeMap<String, (Origin, usize)> = BTreeMap::new();
        let mut arities: BTreeMap<String, (usize, Pos)> = BTreeMap::new();
        let mut facts = Vec::new();

        let check_arity =
            |name: &str, arity: usize, pos: Pos, arities: &mut BTreeMap<String, (usize, Pos)>| {
                match arities.get(name) {
                    Some(&(expected, _)) if expected != arity => Err(KbError::ArityMismatch {
                        name: name.to_string(),
                        expected,
                        found: arity,
                        line: pos.line,
                        column: pos.column,
                    }),
                    Some(_) => Ok(()),
                    None => {
                        arities.insert(name.to_string(), (arity, pos));
                        Ok(())
                    }
                }
            };

        while let Some(stmt) = reader.next_statement()? {
            match stmt {
                Statement::Directive { name, args, pos } => match name.as_str() {
                    "pred" | "background" => {
                        let origin = if name == "pred" {
                            Origin::Input
                        } else {
                            Origin::Background
                        };
                        let (pname, arity, ppos) = syntax::parse_signature(&args, pos)?;
                        check_arity(&pname, arity, ppos, &mut arities)?;
                        if let Some(&(prev, _)) = declared.get(&pname) {
                            if prev != origin {
                                return Err(KbError::OriginConflict {
                                    name: pname,
                                    first: prev,
                                    second: origin,
                                });
                            }
                        }
                        declared.insert(pname, (origin, arity));
                    }
                    "mode" => {
                        let (pname, slots, ppos) = parse_mode(&args, pos)?;
                        check_arity(&pname, slots.len(), ppos, &mut arities)?;
                        let predicate = Predicate::new(&pname, slots.len(), Origin::Input)?;
                        kb.modes
                            .insert(predicate.name.clone(), ModeDeclaration { predicate, slots });
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
                    disjunctive: _,
                } => {
                    if let Some(first) = body.first() {
                        return Err(SyntaxError {
                            pos: first.pos,
                            message: "rules are not allowed in a fact file".into(),
                        }
                        .into());
                    }
                    if head.negated {
                        return Err(SyntaxError {
                            pos: head.pos,
                            message: "negated facts are not allowed".into(),
                        }
                        .into());
                    }
                    let mut args = Vec::with_capacity(head.args.len());
                    for (term, pos) in head.args {
                        match term {
                            RawTerm::Const(c) => args.push(Constant::new(&c)?),
                            RawTerm::Var(v) => {
                                return Err(KbError::VariableInFact {
                                    name: v,
                                    line: pos.line,
                                    column: pos.column,
                                })
                            }
                        }
                    }
                    check_arity(&head.name, args.len(), head.pos, &mut arities)?;
                    facts.push(Fact::from_parts(head.name.as_str().into(), args));
                }
            }
        }

        for (name, (arity, _)) in &arities {
            let origin = declared
                .get(name)
                .map(|&(o, _)| o)
                .unwrap_or(Origin::Input);
            kb.declare(Predicate::new(name, *arity, origin)?)?;
        }
        for mode in kb.modes.values_mut() {
            mode.predicate.origin = kb.predicates[&mode.predicate.name].origin;
        }
        for fact in facts {
            kb.insert(fact)?;
        }
        Ok(kb)
    }

    /// Adds a predicate to the vocabulary. Re-declaring with the same
    /// signature and origin is a no-op.
    pub fn declare(&mut self, predicate: Predicate) -> Result<(), KbError> {
        if let Some(prev) = self.predicates.get(&predicate.name) {
            if prev.arity != predicate.arity {
                return Err(KbError::ArityMismatch {
                    name: predicate.name.to_string(),
                    expected: prev.arity,
                    found: predicate.arity,
                    line: 0,
                    column: 0,
                });
            }
            if prev.origin != predicate.origin {
                return Err(KbError::OriginConflict {
                    name: predicate.name.to_string(),
                    first: prev.origin,
                    second: predicate.origin,
                });
            }
            return Ok(());
        }
        self.predicates.insert(predicate.name.clone(), predicate);
        Ok(())
    }

    /// Inserts a fact, inferring an input predicate when the name is new.
    /// Returns whether the fact was not already present.
    pub fn insert(&mut self, fact: Fact) -> Result<bool, KbError> {
        let origin = match self.predicates.get(&fact.predicate) {
            Some(p) if p.arity != fact.arity() => {
                return Err(KbError::ArityMismatch {
                    name: fact.predicate.to_string(),
                    expected: p.arity,
                    found: fact.arity(),
                    line: 0,
                    column: 0,
                })
            }
            Some(p) => p.origin,
            None => {
                let p = Predicate {
                    name: fact.predicate.clone(),
                    arity: fact.arity(),
                    origin: Origin::Input,
                };
                self.predicates.insert(p.name.clone(), p);
                Origin::Input
            }
        };
        self.constants.extend(fact.args.iter().cloned());
        Ok(if origin == Origin::Background {
            self.background.insert(fact)
        } else {
            self.facts.insert(fact)
        })
    }

    pub fn set_mode(&mut self, mode: ModeDeclaration) -> Result<(), KbError> {
        self.declare(mode.predicate.clone())?;
        self.modes.insert(mode.predicate.name.clone(), mode);
        Ok(())
    }

    /// Builds an input-only knowledge base from facts.
    pub fn from_facts<I: IntoIterator<Item = Fact>>(facts: I) -> Result<Self, KbError> {
        let mut kb = Self::new();
        for f in facts {
            kb.insert(f)?;
        }
        Ok(kb)
    }

    /// Reconstruction targets (non-background facts).
    pub fn facts(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

    pub fn background(&self) -> &BTreeSet<Fact> {
        &self.background
    }

    /// Facts and background facts together, as seen by encoders.
    pub fn encoder_facts(&self) -> BTreeSet<Fact> {
        self.facts.union(&self.background).cloned().collect()
    }

    pub fn constants(&self) -> &BTreeSet<Constant> {
        &self.constants
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.values()
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.get(name)
    }

    pub fn input_predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates
            .values()
            .filter(|p| p.origin != Origin::Background)
    }

    pub fn background_predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates
            .values()
            .filter(|p| p.origin == Origin::Background)
    }

    /// The declared mode, or the all-`?` default.
    pub fn mode(&self, predicate: &Predicate) -> ModeDeclaration {
        self.modes
            .get(&predicate.name)
            .filter(|m| m.predicate.arity == predicate.arity)
            .cloned()
            .unwrap_or_else(|| ModeDeclaration::open(predicate.clone()))
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Full serialization: directives, then every fact sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in self.predicates.values() {
            let kw = if p.origin == Origin::Background {
                "background"
            } else {
                "pred"
            };
            out.push_str(&format!("#{kw} {}/{}\n", p.name, p.arity));
        }
        for m in self.modes.values() {
            out.push_str(&format!("#mode {m}\n"));
        }
        let all: BTreeSet<&Fact> = self.facts.iter().chain(self.background.iter()).collect();
        for f in all {
            out.push_str(&format!("{f}.\n"));
        }
        out
    }
}

fn parse_mode(args: &[syntax::Token], pos: Pos) -> Result<(String, Vec<Mode>, Pos), SyntaxError> {
    let (name, npos) = match args.first() {
        Some(syntax::Token {
            tok: Tok::Lower(n),
            pos,
        }) => (n.clone(), *pos),
        _ => {
            return Err(SyntaxError {
                pos,
                message: "expected `name(slots)` after `#mode`".into(),
            })
        }
    };
    let mut slots = Vec::new();
    if args.len() == 1 {
        return Ok((name, slots, npos));
    }
    syntax::expect_tok(args, 1, &Tok::LParen, pos)?;
    let mut i = 2;
    loop {
        let slot = match args.get(i).map(|t| &t.tok) {
            Some(Tok::Plus) => Mode::Plus,
            Some(Tok::Minus) => Mode::Minus,
            Some(Tok::Question) => Mode::Maybe,
            _ => {
                let p = args.get(i).map(|t| t.pos).unwrap_or(pos);
                return Err(SyntaxError {
                    pos: p,
                    message: "expected a mode slot `+`, `-` or `?`".into(),
                });
            }
        };
        slots.push(slot);
        match args.get(i + 1).map(|t| &t.tok) {
            Some(Tok::Comma) => i += 2,
            Some(Tok::RParen) if i + 2 == args.len() => break,
            _ => {
                let p = args.get(i + 1).map(|t| t.pos).unwrap_or(pos);
                return Err(SyntaxError {
                    pos: p,
                    message: "expected `,` or a closing `)`".into(),
                });
            }
        }
    }
    Ok((name, slots, npos))
}

/// Writes facts one per line, sorted by predicate name then arguments.
pub fn write_facts<'a, I: IntoIterator<Item = &'a Fact>>(facts: I) -> String {
    let sorted: BTreeSet<&Fact> = facts.into_iter().collect();
    let mut out = String::new();
    for f in sorted {
        out.push_str(&f.to_string());
        out.push_str(".\n");
    }
    out
}

/// Every ground atom over `predicates` and `constants`, refusing when the
/// result would exceed `ceiling` atoms.
pub fn herbrand_base<'a, P>(
    predicates: P,
    constants: &BTreeSet<Constant>,
    ceiling: usize,
) -> Result<BTreeSet<Fact>, KbError>
where
    P: IntoIterator<Item = &'a Predicate>,
{
    let predicates: Vec<&Predicate> = predicates.into_iter().collect();
    let n = constants.len() as u128;
    let mut size: u128 = 0;
    for p in &predicates {
        let term = (0..p.arity).try_fold(1u128, |acc, _| acc.checked_mul(n));
        size = match term.and_then(|t| size.checked_add(t)) {
            Some(s) => s,
            None => {
                return Err(KbError::Capacity {
                    size: "more than 2^128".into(),
                    ceiling,
                })
            }
        };
    }
    if size > ceiling as u128 {
        return Err(KbError::Capacity {
            size: size.to_string(),
            ceiling,
        });
    }
    let consts: Vec<&Constant> = constants.iter().collect();
    let mut out = BTreeSet::new();
    for p in predicates {
        let mut idx = vec![0usize; p.arity];
        if p.arity > 0 && consts.is_empty() {
            continue;
        }
        loop {
            out.insert(Fact::from_parts(
                p.name.clone(),
                idx.iter().map(|&i| consts[i].clone()).collect(),
            ));
            let mut done = true;
            let mut k = p.arity;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < consts.len() {
                    done = false;
                    break;
                }
                idx[k] = 0;
            }
            if done {
                break;
            }
        }
    }
    Ok(out)
}

/// The average number of facts per non-background predicate, `G`.
pub fn avg_facts_per_predicate(kb: &KnowledgeBase) -> Result<Ratio, KbError> {
    let preds = kb.input_predicates().count();
    if preds == 0 {
        return Err(KbError::EmptyVocabulary);
    }
    Ok(Ratio::new(kb.facts().len() as i64, preds as i64))
}

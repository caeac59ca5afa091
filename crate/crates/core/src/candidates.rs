//! Candidate clause enumeration under mode bias.
//!
//! Bodies grow one atom at a time. A `+` slot reuses a variable already in
//! the body, a `-` slot introduces a fresh one and a `?` slot does either.
//! Every added atom must share a variable with the body; an atom made only
//! of `-` slots would never connect, so its slots may then bind existing
//! variables (at least one of them). Bodies equal up to variable renaming
//! and literal order are kept once.
//!
//! Encoder heads are fresh latent predicates over subsets of the body
//! variables. Decoder bodies range over the latent vocabulary and their
//! heads over the input predicates.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::kb::{Constant, Fact, KnowledgeBase, Mode, ModeDeclaration, Origin, Predicate};
use crate::logic::{self, Clause, Connective, FactIndex, Literal, Term, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerationError {
    #[error("candidate pool exceeds the ceiling of {ceiling} clauses")]
    Capacity { ceiling: usize },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct GenerationConfig {
    pub max_encoder_body_len: usize,
    pub max_decoder_body_len: usize,
    pub max_head_vars: usize,
    pub allow_disjunction: bool,
    pub allow_negation: bool,
    /// Ceiling on the number of candidates of each kind.
    pub max_candidates: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            max_encoder_body_len: 2,
            max_decoder_body_len: 2,
            max_head_vars: 2,
            allow_disjunction: true,
            allow_negation: false,
            max_candidates: 200_000,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self, max_arity: usize) -> Result<(), GenerationError> {
        if self.max_encoder_body_len == 0 || self.max_decoder_body_len == 0 {
            return Err(GenerationError::InvalidConfig("body lengths must be at least 1".into()));
        }
        if self.max_head_vars == 0 {
            return Err(GenerationError::InvalidConfig("max_head_vars must be at least 1".into()));
        }
        if max_arity > 0 && self.max_head_vars > max_arity {
            return Err(GenerationError::InvalidConfig(format!(
                "max_head_vars {} exceeds the largest predicate arity {max_arity}",
                self.max_head_vars
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Encoder,
    Decoder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateClause {
    pub clause: Clause,
    pub kind: CandidateKind,
    /// Ground consequences on the training data.
    pub consequences: BTreeSet<Fact>,
    /// Number of latent facts entailed (encoders); `|consequences|` for decoders too.
    pub weight: usize,
}

impl CandidateClause {
    pub fn head_name(&self) -> &Arc<str> {
        &self.clause.head().predicate
    }

    pub fn head_predicate(&self, origin: Origin) -> Predicate {
        Predicate {
            name: self.head_name().clone(),
            arity: self.clause.head().arity(),
            origin,
        }
    }

    /// Argument tuples of the consequences, i.e. the consequence set modulo
    /// the head predicate name.
    pub fn tuples(&self) -> BTreeSet<&[Constant]> {
        self.consequences.iter().map(|f| f.args.as_slice()).collect()
    }
}

/// Encoder and decoder candidates, each in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidatePool {
    pub encoders: Vec<CandidateClause>,
    pub decoders: Vec<CandidateClause>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.encoders.len() + self.decoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoders.is_empty() && self.decoders.is_empty()
    }

    /// Encoder index by latent predicate name.
    pub fn encoder_by_latent(&self) -> HashMap<Arc<str>, usize> {
        self.encoders
            .iter()
            .enumerate()
            .map(|(i, e)| (e.head_name().clone(), i))
            .collect()
    }

    /// Logic-program text of the pool with `ec<i>` / `dc<i>` comments.
    pub fn to_program_text(&self) -> String {
        let mut out = String::from("#encoder\n");
        for (i, c) in self.encoders.iter().enumerate() {
            out.push_str(&format!("{}. % ec{i}\n", c.clause));
        }
        out.push_str("#decoder\n");
        for (i, c) in self.decoders.iter().enumerate() {
            out.push_str(&format!("{}. % dc{i}\n", c.clause));
        }
        out
    }

    /// Tab separated: id, kind, weight, number of consequences.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\tkind\tweight\tconsequences\n");
        for (i, c) in self.encoders.iter().enumerate() {
            out.push_str(&format!("ec{i}\tencoder\t{}\t{}\n", c.weight, c.consequences.len()));
        }
        for (i, c) in self.decoders.iter().enumerate() {
            out.push_str(&format!("dc{i}\tdecoder\t{}\t{}\n", c.weight, c.consequences.len()));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Bodies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct LitKey {
    pred: u32,
    negated: bool,
    vars: Vec<u32>,
}

/// A candidate body in canonical form: variables are named `X, Y, Z, ...`
/// in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Body {
    pub literals: Vec<Literal>,
    pub connective: Connective,
}

impl Body {
    /// Distinct variables in first-appearance order.
    pub fn variables(&self) -> Vec<Variable> {
        let mut out: Vec<Variable> = Vec::new();
        for l in &self.literals {
            for v in l.variables() {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }
}

impl std::fmt::Display for Body {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sep = match self.connective {
            Connective::Conjunction => ",",
            Connective::Disjunction => ";",
        };
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(sep)?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

struct Vocabulary<'a> {
    modes: &'a [ModeDeclaration],
}

impl Vocabulary<'_> {
    fn body(&self, key: &[LitKey], connective: Connective) -> Body {
        Body {
            literals: key
                .iter()
                .map(|k| {
                    let p = &self.modes[k.pred as usize].predicate;
                    Literal {
                        predicate: p.name.clone(),
                        args: k.vars.iter().map(|&v| Term::Var(Variable::canonical(v as usize))).collect(),
                        negated: k.negated,
                    }
                })
                .collect(),
            connective,
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn rename_first_appearance(order: &[LitKey]) -> Vec<LitKey> {
    let mut map: Vec<(u32, u32)> = Vec::new();
    order
        .iter()
        .map(|l| LitKey {
            pred: l.pred,
            negated: l.negated,
            vars: l
                .vars
                .iter()
                .map(|v| match map.iter().find(|(from, _)| from == v) {
                    Some(&(_, to)) => to,
                    None => {
                        let to = map.len() as u32;
                        map.push((*v, to));
                        to
                    }
                })
                .collect(),
        })
        .collect()
}

/// The least key over literal orders, with variables renumbered by first
/// appearance. Bodies longer than six literals are ordered by sorting only.
fn canonical(lits: &[LitKey], perms: &HashMap<usize, Vec<Vec<usize>>>) -> Vec<LitKey> {
    match perms.get(&lits.len()) {
        Some(ps) => ps
            .iter()
            .map(|p| rename_first_appearance(&p.iter().map(|&i| lits[i].clone()).collect::<Vec<_>>()))
            .min()
            .expect("at least one permutation"),
        None => {
            let mut sorted = lits.to_vec();
            sorted.sort();
            rename_first_appearance(&sorted)
        }
    }
}

fn var_count(lits: &[LitKey]) -> u32 {
    lits.iter()
        .flat_map(|l| l.vars.iter())
        .map(|&v| v + 1)
        .max()
        .unwrap_or(0)
}

/// Argument choices for one new atom: each slot gets an existing variable
/// index `< existing` or a fresh one.
fn atom_options(slots: &[Mode], existing: u32, negated: bool) -> Vec<Vec<u32>> {
    let all_minus = slots.iter().all(|m| *m == Mode::Minus);
    let mut out: Vec<Vec<u32>> = vec![Vec::new()];
    for slot in slots {
        let mut next = Vec::new();
        for partial in &out {
            let fresh_so_far = partial.iter().filter(|&&v| v >= existing).count() as u32;
            let fresh = existing + fresh_so_far;
            let choices: Vec<u32> = match (slot, negated, all_minus) {
                (_, true, _) => (0..existing).collect(),
                (Mode::Plus, false, _) => (0..existing).collect(),
                (Mode::Minus, false, false) => vec![fresh],
                (Mode::Minus, false, true) | (Mode::Maybe, false, _) => {
                    (0..existing).chain(std::iter::once(fresh)).collect()
                }
            };
            for c in choices {
                let mut p = partial.clone();
                p.push(c);
                next.push(p);
            }
        }
        out = next;
    }
    out.retain(|args| args.iter().any(|&v| v < existing));
    out
}

fn extend_keys(
    body: &[LitKey],
    modes: &[ModeDeclaration],
    allow_negation: bool,
    perms: &HashMap<usize, Vec<Vec<usize>>>,
    out: &mut BTreeSet<Vec<LitKey>>,
) {
    let existing = var_count(body);
    let has_negation = body.iter().any(|l| l.negated);
    for (pi, mode) in modes.iter().enumerate() {
        if mode.slots.is_empty() {
            continue;
        }
        let mut variants = vec![false];
        if allow_negation && !has_negation {
            variants.push(true);
        }
        for negated in variants {
            for args in atom_options(&mode.slots, existing, negated) {
                let lit = LitKey {
                    pred: pi as u32,
                    negated,
                    vars: args,
                };
                if body
                    .iter()
                    .any(|l| l.pred == lit.pred && l.vars == lit.vars)
                {
                    continue;
                }
                let mut next = body.to_vec();
                next.push(lit);
                out.insert(canonical(&next, perms));
            }
        }
    }
}

fn singleton_keys(modes: &[ModeDeclaration]) -> BTreeSet<Vec<LitKey>> {
    modes
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.slots.is_empty())
        .map(|(pi, m)| {
            vec![LitKey {
                pred: pi as u32,
                negated: false,
                vars: (0..m.slots.len() as u32).collect(),
            }]
        })
        .collect()
}

fn perm_table(max_len: usize) -> HashMap<usize, Vec<Vec<usize>>> {
    (1..=max_len.min(6)).map(|n| (n, permutations(n))).collect()
}

/// Sorts modes by predicate name, which fixes the canonical literal order.
fn sorted_modes(modes: &[ModeDeclaration]) -> Vec<ModeDeclaration> {
    let mut m = modes.to_vec();
    m.sort_by(|a, b| a.predicate.cmp(&b.predicate));
    m.dedup_by(|a, b| a.predicate == b.predicate);
    m
}

/// Every body of up to `max_len` literals reachable by connected extension,
/// plus (optionally) disjunctions of equal-arity predicates over one shared
/// variable tuple. Sorted: conjunctions before disjunctions, shorter first.
pub fn enumerate_bodies(
    modes: &[ModeDeclaration],
    max_len: usize,
    allow_disjunction: bool,
    allow_negation: bool,
) -> Vec<Body> {
    let space = BodySpace {
        max_len,
        allow_disjunction,
        allow_negation,
        limit: usize::MAX,
    };
    enumerate_bodies_where(modes, &space, |_| Some(()))
        .expect("no limit")
        .into_iter()
        .map(|(b, _)| b)
        .collect()
}

struct BodySpace {
    max_len: usize,
    allow_disjunction: bool,
    allow_negation: bool,
    /// Ceiling on kept bodies.
    limit: usize,
}

/// Like [`enumerate_bodies`], keeping the bodies for which `keep` returns
/// something. A rejected conjunction is not extended, so `keep` must reject
/// every extension of a body it rejects (true of "has a binding").
fn enumerate_bodies_where<T>(
    modes: &[ModeDeclaration],
    space: &BodySpace,
    mut keep: impl FnMut(&Body) -> Option<T>,
) -> Result<Vec<(Body, T)>, GenerationError> {
    let modes = sorted_modes(modes);
    let perms = perm_table(space.max_len);
    let vocab = Vocabulary { modes: &modes };
    let mut out = Vec::new();
    if space.max_len == 0 {
        return Ok(out);
    }
    let capacity = || GenerationError::Capacity { ceiling: space.limit };
    let mut level: BTreeMap<Vec<LitKey>, T> = BTreeMap::new();
    for key in singleton_keys(&modes) {
        if let Some(t) = keep(&vocab.body(&key, Connective::Conjunction)) {
            level.insert(key, t);
        }
    }
    for len in 1..=space.max_len {
        if len < space.max_len {
            let mut next = BTreeMap::new();
            let mut rejected = HashSet::new();
            let mut fresh = BTreeSet::new();
            for body in level.keys() {
                extend_keys(body, &modes, space.allow_negation, &perms, &mut fresh);
                for key in std::mem::take(&mut fresh) {
                    if next.contains_key(&key) || rejected.contains(&key) {
                        continue;
                    }
                    match keep(&vocab.body(&key, Connective::Conjunction)) {
                        Some(t) => {
                            next.insert(key, t);
                        }
                        None => {
                            rejected.insert(key);
                        }
                    }
                }
                if out.len() + level.len() + next.len() > space.limit {
                    return Err(capacity());
                }
            }
            out.extend(level.into_iter().map(|(k, t)| (vocab.body(&k, Connective::Conjunction), t)));
            level = next;
        } else {
            out.extend(std::mem::take(&mut level).into_iter().map(|(k, t)| (vocab.body(&k, Connective::Conjunction), t)));
        }
    }
    if out.len() > space.limit {
        return Err(capacity());
    }
    if space.allow_disjunction {
        let mut by_arity: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for (pi, m) in modes.iter().enumerate() {
            if !m.slots.is_empty() {
                by_arity.entry(m.slots.len()).or_default().push(pi as u32);
            }
        }
        for (arity, preds) in by_arity {
            let vars: Vec<u32> = (0..arity as u32).collect();
            for size in 2..=space.max_len.min(preds.len()) {
                for combo in combinations(preds.len(), size) {
                    let key: Vec<LitKey> = combo
                        .iter()
                        .map(|&i| LitKey {
                            pred: preds[i],
                            negated: false,
                            vars: vars.clone(),
                        })
                        .collect();
                    let body = vocab.body(&key, Connective::Disjunction);
                    if let Some(t) = keep(&body) {
                        out.push((body, t));
                        if out.len() > space.limit {
                            return Err(capacity());
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Rewrites a clause into canonical form: the body takes its least literal
/// order under predicate-name order, ties broken by the head, and variables
/// are renamed by first appearance in the body.
pub fn canonical_clause(clause: &Clause) -> Clause {
    let body = clause.body();
    let names: BTreeSet<(&Arc<str>, usize)> = body.iter().map(|l| (&l.predicate, l.arity())).collect();
    let names: Vec<(&Arc<str>, usize)> = names.into_iter().collect();
    let mut vars: Vec<&Variable> = Vec::new();
    for v in body.iter().flat_map(|l| l.variables()) {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    let var_ix = |v: &Variable| vars.iter().position(|x| *x == v).expect("range restricted") as u32;
    let keys: Vec<LitKey> = body
        .iter()
        .map(|l| LitKey {
            pred: names.binary_search(&(&l.predicate, l.arity())).expect("present") as u32,
            negated: l.negated,
            vars: l.variables().map(var_ix).collect(),
        })
        .collect();
    let head = LitKey {
        pred: u32::MAX,
        negated: false,
        vars: clause.head().variables().map(var_ix).collect(),
    };
    let orders: Vec<Vec<usize>> = if clause.connective() == Connective::Conjunction && keys.len() <= 6 {
        permutations(keys.len())
    } else {
        let mut idx: Vec<usize> = (0..keys.len()).collect();
        idx.sort_by(|&i, &j| keys[i].cmp(&keys[j]));
        vec![idx]
    };
    let best = orders
        .iter()
        .map(|order| {
            let mut seq: Vec<LitKey> = order.iter().map(|&i| keys[i].clone()).collect();
            seq.push(head.clone());
            rename_first_appearance(&seq)
        })
        .min()
        .expect("at least one order");
    let (head_key, body_keys) = best.split_last().expect("head present");
    let lit = |k: &LitKey, name: &Arc<str>| Literal {
        predicate: name.clone(),
        args: k.vars.iter().map(|&v| Term::Var(Variable::canonical(v as usize))).collect(),
        negated: k.negated,
    };
    Clause::new(
        lit(head_key, &clause.head().predicate),
        body_keys.iter().map(|k| lit(k, names[k.pred as usize].0)).collect(),
        clause.connective(),
    )
    .expect("renaming preserves validity")
}

/// One extension step from `start` (given as a body over the predicates in
/// `modes`).
pub fn extend_body(start: &Body, modes: &[ModeDeclaration], allow_negation: bool) -> Vec<Body> {
    let modes = sorted_modes(modes);
    let perms = perm_table(start.literals.len() + 1);
    let vocab = Vocabulary { modes: &modes };
    let vars = start.variables();
    let key: Vec<LitKey> = start
        .literals
        .iter()
        .map(|l| LitKey {
            pred: modes
                .iter()
                .position(|m| m.predicate.name == l.predicate && m.slots.len() == l.arity())
                .expect("body predicate has a mode") as u32,
            negated: l.negated,
            vars: l
                .variables()
                .map(|v| vars.iter().position(|x| x == v).expect("known variable") as u32)
                .collect(),
        })
        .collect();
    let mut out = BTreeSet::new();
    extend_keys(&key, &modes, allow_negation, &perms, &mut out);
    out.iter().map(|k| vocab.body(k, Connective::Conjunction)).collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Head variable subsets: largest first, lexicographic within a size, with
/// variables in first-appearance order.
fn head_subsets(var_count: usize, max_head_vars: usize) -> Vec<Vec<usize>> {
    (1..=max_head_vars.min(var_count))
        .rev()
        .flat_map(|k| combinations(var_count, k))
        .collect()
}

/// Turns a body into clauses, one per admissible head variable subset, with
/// each head predicate minted by `mint` from the head arity.
pub fn generate_heads(body: &Body, max_head_vars: usize, mut mint: impl FnMut(usize) -> Arc<str>) -> Vec<Clause> {
    let vars = body.variables();
    head_subsets(vars.len(), max_head_vars)
        .into_iter()
        .map(|subset| {
            let head_vars: Vec<Variable> = subset.iter().map(|&i| vars[i].clone()).collect();
            Clause::new(
                Literal::with_vars(mint(head_vars.len()), &head_vars),
                body.literals.clone(),
                body.connective,
            )
            .expect("generated clauses are range restricted")
        })
        .collect()
}

/// A `latent_` style prefix that no vocabulary predicate can collide with.
fn latent_prefix(kb: &KnowledgeBase) -> String {
    let mut prefix = String::from("latent_");
    let clashes = |prefix: &str| {
        kb.predicates().any(|p| {
            p.name
                .strip_prefix(prefix)
                .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
        })
    };
    while clashes(&prefix) {
        prefix.push('_');
    }
    prefix
}

fn project(bindings: &BTreeSet<Vec<Constant>>, positions: &[usize]) -> BTreeSet<Vec<Constant>> {
    bindings
        .iter()
        .map(|b| positions.iter().map(|&i| b[i].clone()).collect())
        .collect()
}

fn satisfiable(body: &Body, index: &FactIndex) -> Option<BTreeSet<Vec<Constant>>> {
    let bindings = logic::body_bindings(&body.literals, body.connective, index);
    (!bindings.is_empty()).then_some(bindings)
}

/// Modes of the predicates encoder bodies may use: input and background.
pub fn encoder_modes(kb: &KnowledgeBase) -> Vec<ModeDeclaration> {
    kb.predicates().map(|p| kb.mode(p)).collect()
}

/// Enumerates encoder clauses over the knowledge base and background
/// predicates, keeping those that entail at least one latent fact. Latent
/// predicates are named `latent_<k>` in canonical order.
pub fn generate_encoder_candidates(
    kb: &KnowledgeBase,
    config: &GenerationConfig,
) -> Result<Vec<CandidateClause>, GenerationError> {
    generate_encoder_candidates_with_modes(kb, &encoder_modes(kb), config)
}

pub fn generate_encoder_candidates_with_modes(
    kb: &KnowledgeBase,
    modes: &[ModeDeclaration],
    config: &GenerationConfig,
) -> Result<Vec<CandidateClause>, GenerationError> {
    let max_arity = modes.iter().map(|m| m.slots.len()).max().unwrap_or(0);
    config.validate(max_arity)?;
    let facts = kb.encoder_facts();
    let index = FactIndex::new(&facts);
    let space = BodySpace {
        max_len: config.max_encoder_body_len,
        allow_disjunction: config.allow_disjunction,
        allow_negation: config.allow_negation,
        limit: config.max_candidates,
    };
    let bodies = enumerate_bodies_where(modes, &space, |b| satisfiable(b, &index))?;
    let prefix = latent_prefix(kb);
    let mut out = Vec::new();
    for (body, bindings) in &bodies {
        let var_count = body.variables().len();
        for subset in head_subsets(var_count, config.max_head_vars) {
            let name: Arc<str> = format!("{prefix}{}", out.len() + 1).into();
            let vars = body.variables();
            let head_vars: Vec<Variable> = subset.iter().map(|&i| vars[i].clone()).collect();
            let clause = Clause::new(
                Literal::with_vars(name.clone(), &head_vars),
                body.literals.clone(),
                body.connective,
            )
            .expect("range restricted");
            let consequences: BTreeSet<Fact> = project(bindings, &subset)
                .into_iter()
                .map(|args| Fact::from_parts(name.clone(), args))
                .collect();
            let weight = consequences.len();
            out.push(CandidateClause {
                clause,
                kind: CandidateKind::Encoder,
                consequences,
                weight,
            });
            if out.len() > config.max_candidates {
                return Err(GenerationError::Capacity {
                    ceiling: config.max_candidates,
                });
            }
        }
    }
    Ok(out)
}

/// Enumerates decoder clauses: conjunctive bodies over the latent predicates
/// defined by `latent_candidates`, heads over the input predicates of `kb`
/// with arguments taken from the body variables in first-appearance order.
pub fn generate_decoder_candidates(
    latent_candidates: &[CandidateClause],
    kb: &KnowledgeBase,
    config: &GenerationConfig,
) -> Result<Vec<CandidateClause>, GenerationError> {
    let latent_modes: Vec<ModeDeclaration> = latent_candidates
        .iter()
        .map(|c| ModeDeclaration::open(c.head_predicate(Origin::Latent)))
        .collect();
    let latent_facts: Vec<&Fact> = latent_candidates
        .iter()
        .flat_map(|c| c.consequences.iter())
        .collect();
    let index = FactIndex::new(latent_facts);
    let space = BodySpace {
        max_len: config.max_decoder_body_len,
        allow_disjunction: false,
        allow_negation: false,
        limit: config.max_candidates,
    };
    let bodies = enumerate_bodies_where(&latent_modes, &space, |b| satisfiable(b, &index))?;
    let heads: Vec<&Predicate> = kb.input_predicates().collect();
    let mut out = Vec::new();
    for (body, bindings) in &bodies {
        let vars = body.variables();
        for head in &heads {
            if head.arity > vars.len() {
                continue;
            }
            for subset in combinations(vars.len(), head.arity) {
                let head_vars: Vec<Variable> = subset.iter().map(|&i| vars[i].clone()).collect();
                let clause = Clause::new(
                    Literal::with_vars(head.name.clone(), &head_vars),
                    body.literals.clone(),
                    body.connective,
                )
                .expect("range restricted");
                let consequences: BTreeSet<Fact> = project(bindings, &subset)
                    .into_iter()
                    .map(|args| Fact::from_parts(head.name.clone(), args))
                    .collect();
                let weight = consequences.len();
                out.push(CandidateClause {
                    clause,
                    kind: CandidateKind::Decoder,
                    consequences,
                    weight,
                });
                if out.len() > config.max_candidates {
                    return Err(GenerationError::Capacity {
                        ceiling: config.max_candidates,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Encoders followed by the decoders over their latent vocabulary.
pub fn generate_pool(kb: &KnowledgeBase, config: &GenerationConfig) -> Result<CandidatePool, GenerationError> {
    let encoders = generate_encoder_candidates(kb, config)?;
    let decoders = generate_decoder_candidates(&encoders, kb, config)?;
    Ok(CandidatePool { encoders, decoders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mode(name: &str, slots: &[Mode]) -> ModeDeclaration {
        ModeDeclaration {
            predicate: Predicate::new(name, slots.len(), Origin::Input).unwrap(),
            slots: slots.to_vec(),
        }
    }

    fn texts(bodies: &[Body]) -> BTreeSet<String> {
        bodies.iter().map(|b| b.to_string()).collect()
    }

    fn single(name: &str, arity: usize) -> Body {
        let vars: Vec<Variable> = (0..arity).map(Variable::canonical).collect();
        Body {
            literals: vec![Literal::with_vars(name, &vars)],
            connective: Connective::Conjunction,
        }
    }

    #[test]
    fn mode_guided_extension_matches_worked_example() {
        let modes = [mode("p", &[Mode::Plus, Mode::Minus]), mode("q", &[Mode::Minus])];
        let got = texts(&extend_body(&single("p", 2), &modes, false));
        let want: BTreeSet<String> = ["p(X,Y),p(Y,Z)", "p(X,Y),p(X,Z)", "p(X,Y),q(X)", "p(X,Y),q(Y)"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn length_one_bodies_are_singletons() {
        let modes = [mode("p", &[Mode::Plus, Mode::Minus]), mode("q", &[Mode::Minus])];
        let got = enumerate_bodies(&modes, 1, false, false);
        assert_eq!(texts(&got), ["p(X,Y)", "q(X)"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn disjunctive_bodies() {
        let modes = [mode("mother", &[Mode::Maybe; 2]), mode("father", &[Mode::Maybe; 2])];
        let got = texts(&enumerate_bodies(&modes, 2, true, false));
        assert!(got.contains("father(X,Y);mother(X,Y)"));
        assert!(!texts(&enumerate_bodies(&modes, 2, false, false)).iter().any(|b| b.contains(';')));
    }

    #[test]
    fn bodies_are_deduplicated_modulo_order_and_renaming() {
        let modes = [mode("p", &[Mode::Maybe; 2]), mode("q", &[Mode::Maybe])];
        let bodies = enumerate_bodies(&modes, 2, false, false);
        let t = texts(&bodies);
        assert_eq!(t.len(), bodies.len());
        assert!(t.contains("p(X,Y),q(X)"));
        assert!(!t.contains("q(X),p(X,Y)"));
        // p(X,Y) extended by p: every connected placement except the duplicate atom
        let pp: Vec<_> = t.iter().filter(|s| s.matches("p(").count() == 2).collect();
        assert_eq!(pp.len(), 6, "{pp:?}");
    }

    #[test]
    fn head_generation() {
        let body = Body {
            literals: vec![
                Literal::with_vars("p", &[Variable::canonical(0), Variable::canonical(1)]),
                Literal::with_vars("p", &[Variable::canonical(1), Variable::canonical(2)]),
            ],
            connective: Connective::Conjunction,
        };
        let mut k = 0;
        let clauses = generate_heads(&body, 2, |_| {
            k += 1;
            format!("h{k}").into()
        });
        let heads: Vec<String> = clauses.iter().map(|c| c.head().to_string()).collect();
        assert_eq!(heads, ["h1(X,Y)", "h2(X,Z)", "h3(Y,Z)", "h4(X)", "h5(Y)", "h6(Z)"]);

        let one = generate_heads(&single("q", 1), 2, |_| "h".into());
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].to_string(), "h(X) :- q(X)");
    }

    #[test]
    fn encoder_candidates_for_single_fact() {
        let kb = KnowledgeBase::parse("p(a,b).").unwrap();
        let config = GenerationConfig {
            max_encoder_body_len: 1,
            max_decoder_body_len: 1,
            ..Default::default()
        };
        let enc = generate_encoder_candidates(&kb, &config).unwrap();
        let got: Vec<String> = enc.iter().map(|c| c.clause.to_string()).collect();
        assert_eq!(
            got,
            [
                "latent_1(X,Y) :- p(X,Y)",
                "latent_2(X) :- p(X,Y)",
                "latent_3(Y) :- p(X,Y)"
            ]
        );
        assert!(enc.iter().all(|c| c.weight == 1));
        assert!(generate_encoder_candidates(&KnowledgeBase::new(), &config)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn disjunctive_encoder_weight() {
        let kb = KnowledgeBase::parse(
            "mother(padme,luke). mother(padme,leia). father(vader,luke). father(vader,leia).\n\
             female(padme). female(leia). male(vader). saber(vader,red). saber(luke,green).",
        )
        .unwrap();
        let enc = generate_encoder_candidates(&kb, &GenerationConfig::default()).unwrap();
        let c = enc
            .iter()
            .find(|c| c.clause.to_string().ends_with("(X,Y) :- father(X,Y);mother(X,Y)"))
            .unwrap();
        assert_eq!(c.weight, 4);
    }

    #[test]
    fn latent_names_avoid_input_collisions() {
        let kb = KnowledgeBase::parse("latent_1(a).").unwrap();
        let enc = generate_encoder_candidates(&kb, &GenerationConfig { max_head_vars: 1, ..Default::default() }).unwrap();
        assert!(enc.iter().all(|c| c.head_name().starts_with("latent__")));
    }

    #[test]
    fn capacity_ceiling() {
        let kb = KnowledgeBase::parse("p(a,b). q(b,c). r(c,a).").unwrap();
        let config = GenerationConfig {
            max_candidates: 5,
            ..Default::default()
        };
        assert_eq!(
            generate_encoder_candidates(&kb, &config),
            Err(GenerationError::Capacity { ceiling: 5 })
        );
    }

    #[test]
    fn decoder_candidates() {
        let latent = CandidateClause {
            clause: alp_clause("latent1(X,Y) :- q(X,Y)"),
            kind: CandidateKind::Encoder,
            consequences: [Fact::new("latent1", &["a", "b"]).unwrap()].into_iter().collect(),
            weight: 1,
        };
        let kb = KnowledgeBase::parse("p(a,b).").unwrap();
        let config = GenerationConfig::default();
        let dec = generate_decoder_candidates(std::slice::from_ref(&latent), &kb, &config).unwrap();
        let d = dec
            .iter()
            .find(|d| d.clause.to_string() == "p(X,Y) :- latent1(X,Y)")
            .unwrap();
        assert_eq!(d.consequences, [Fact::new("p", &["a", "b"]).unwrap()].into_iter().collect());

        let empty = CandidateClause {
            consequences: BTreeSet::new(),
            ..latent
        };
        assert!(generate_decoder_candidates(&[empty], &kb, &config).unwrap().is_empty());
    }

    #[test]
    fn decoder_conjunction_over_two_latents() {
        let kb = KnowledgeBase::parse(
            "mother(padme,leia). parent(padme,leia). parent(vader,leia). female(padme).",
        )
        .unwrap();
        let pool = generate_pool(&kb, &GenerationConfig::default()).unwrap();
        let l_parent = pool
            .encoders
            .iter()
            .find(|c| c.clause.to_string().ends_with("(X,Y) :- parent(X,Y)"))
            .unwrap()
            .head_name()
            .clone();
        let l_female = pool
            .encoders
            .iter()
            .find(|c| c.clause.to_string().ends_with("(X) :- female(X)"))
            .unwrap()
            .head_name()
            .clone();
        let texts: BTreeSet<String> = pool.decoders.iter().map(|d| d.clause.to_string()).collect();
        let joined = texts
            .iter()
            .filter(|t| t.starts_with("mother(X,Y) :- "))
            .any(|t| t.contains(&format!("{l_parent}(")) && t.contains(&format!("{l_female}(")));
        assert!(joined);
    }

    fn alp_clause(text: &str) -> Clause {
        crate::logic::Alp::parse(&format!("#encoder\n{text}.")).unwrap().encoder.clauses[0].clone()
    }

    #[test]
    fn clause_canonical_form() {
        let c = alp_clause("m(Y,A) :- l2(A,B),l1(Y)");
        assert_eq!(canonical_clause(&c).to_string(), "m(X,Y) :- l1(X),l2(Y,Z)");
        let twin = alp_clause("m(X,Y) :- l1(X),l2(Y,Z)");
        assert_eq!(canonical_clause(&twin), canonical_clause(&c));
        let sym = alp_clause("m(Y) :- l(X,Z),l(Y,Z)");
        assert_eq!(canonical_clause(&sym).to_string(), "m(X) :- l(X,Y),l(Z,Y)");
    }

    fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
        let c = prop::sample::select(vec!["a", "b", "c", "d"]);
        let atom = (prop::sample::select(vec![("p", 2usize), ("q", 1), ("r", 2)]), prop::collection::vec(c, 2))
            .prop_map(|((n, k), args)| Fact::new(n, &args[..k]).unwrap());
        prop::collection::vec(atom, 0..10).prop_map(|mut f| {
            f.push(Fact::new("p", &["a", "b"]).unwrap());
            KnowledgeBase::from_facts(f).unwrap()
        })
    }

    fn connected(body: &Body) -> bool {
        let lits = &body.literals;
        let mut seen = vec![false; lits.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..lits.len() {
                if !seen[j] && lits[i].variables().any(|v| lits[j].variables().any(|w| v == w)) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn generated_clauses_are_connected_and_safe(kb in arb_kb()) {
            let config = GenerationConfig::default();
            let pool = generate_pool(&kb, &config).unwrap();
            let all_facts = kb.encoder_facts();
            let index = FactIndex::new(&all_facts);
            for c in &pool.encoders {
                let body = Body { literals: c.clause.body().to_vec(), connective: c.clause.connective() };
                prop_assert!(connected(&body));
                prop_assert!(!c.consequences.is_empty());
                prop_assert_eq!(c.weight, logic::ground_consequences(&c.clause, &index).len());
            }
            for d in &pool.decoders {
                let body = Body { literals: d.clause.body().to_vec(), connective: d.clause.connective() };
                prop_assert!(connected(&body));
                prop_assert!(!d.consequences.is_empty());
            }
        }

        #[test]
        fn enumeration_is_deterministic(kb in arb_kb()) {
            let config = GenerationConfig::default();
            prop_assert_eq!(generate_pool(&kb, &config).unwrap(), generate_pool(&kb, &config).unwrap());
        }

        #[test]
        fn single_literal_candidate_count(kb in arb_kb(), cap in 1usize..=2) {
            let max_arity = kb.predicates().map(|p| p.arity).max().unwrap_or(1);
            let cap = cap.min(max_arity);
            let config = GenerationConfig { max_encoder_body_len: 1, allow_disjunction: false, max_head_vars: cap, ..Default::default() };
            let enc = generate_encoder_candidates(&kb, &config).unwrap();
            let binom = |n: usize, k: usize| (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
            let expected: usize = kb.predicates().filter(|p| p.arity > 0).map(|p| (1..=cap.min(p.arity)).map(|k| binom(p.arity, k)).sum::<usize>()).sum();
            prop_assert_eq!(enc.len(), expected);
        }
    }
}

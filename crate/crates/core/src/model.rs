//! Boolean constraint optimisation model over a candidate pool.
//!
//! One variable per encoder candidate (`ec`), per decoder candidate (`dc`)
//! and per ground atom some decoder can reconstruct (`rf`). Variables are
//! also addressed by a flat index: encoders first, then decoders, then
//! reconstructed atoms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use num_traits::CheckedMul;
use thiserror::Error;

use crate::candidates::{CandidateClause, CandidatePool};
use crate::kb::{avg_facts_per_predicate, Constant, Fact, KbError, KnowledgeBase, Origin};
use crate::logic::{self, Alp, LogicError};
use crate::pruning::corruption_level;
use crate::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("compression level must be positive, got {0}")]
    InvalidGamma(Ratio),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("decoder `{decoder}` uses latent predicate {latent}, which no encoder candidate defines")]
    UndefinedLatent { decoder: String, latent: String },
    #[error("bottleneck coefficients overflow 64-bit integers")]
    Overflow,
    #[error("assignment violates {} constraint(s), first: {}", .0.len(), .0[0])]
    Violated(Vec<String>),
    #[error("assignment has {found} values, model has {expected} variables")]
    Size { expected: usize, found: usize },
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Ec,
    Dc,
    Rf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId {
    pub kind: VarKind,
    pub index: usize,
}

impl VarId {
    pub fn ec(index: usize) -> Self {
        Self { kind: VarKind::Ec, index }
    }

    pub fn dc(index: usize) -> Self {
        Self { kind: VarKind::Dc, index }
    }

    pub fn rf(index: usize) -> Self {
        Self { kind: VarKind::Rf, index }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            VarKind::Ec => "ec",
            VarKind::Dc => "dc",
            VarKind::Rf => "rf",
        };
        write!(f, "{tag}{}", self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    /// `target <=> sources[0] or sources[1] or ...`; with no sources the
    /// target is forced false.
    IffOr { target: VarId, sources: Vec<VarId> },
    /// `not (a and b)`.
    AtMostOnePair(VarId, VarId),
    /// `x1 or x2 or ...`.
    AtLeastOne(Vec<VarId>),
    /// `sum coeff * x <= 0`.
    LinearLe { terms: Vec<(i64, VarId)> },
}

impl Constraint {
    pub fn form(&self) -> &'static str {
        match self {
            Constraint::IffOr { .. } => "iff_or",
            Constraint::AtMostOnePair(..) => "at_most_one_of_pair",
            Constraint::AtLeastOne(_) => "at_least_one",
            Constraint::LinearLe { .. } => "linear_le",
        }
    }

    pub fn vars(&self) -> Vec<VarId> {
        match self {
            Constraint::IffOr { target, sources } => std::iter::once(*target).chain(sources.iter().copied()).collect(),
            Constraint::AtMostOnePair(a, b) => vec![*a, *b],
            Constraint::AtLeastOne(xs) => xs.clone(),
            Constraint::LinearLe { terms } => terms.iter().map(|(_, v)| *v).collect(),
        }
    }

    pub fn holds(&self, value: impl Fn(VarId) -> bool) -> bool {
        match self {
            Constraint::IffOr { target, sources } => value(*target) == sources.iter().any(|s| value(*s)),
            Constraint::AtMostOnePair(a, b) => !(value(*a) && value(*b)),
            Constraint::AtLeastOne(xs) => xs.iter().any(|x| value(*x)),
            Constraint::LinearLe { terms } => {
                terms.iter().filter(|(_, v)| value(*v)).map(|(c, _)| *c as i128).sum::<i128>() <= 0
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.form())?;
        match self {
            Constraint::IffOr { target, sources } => {
                write!(f, " {target}")?;
                for s in sources {
                    write!(f, " {s}")?;
                }
            }
            Constraint::AtMostOnePair(a, b) => write!(f, " {a} {b}")?,
            Constraint::AtLeastOne(xs) => {
                for x in xs {
                    write!(f, " {x}")?;
                }
            }
            Constraint::LinearLe { terms } => {
                for (c, v) in terms {
                    write!(f, " {c}*{v}")?;
                }
                f.write_str(" <= 0")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcInfo {
    pub clause: String,
    pub latent: Arc<str>,
    pub weight: usize,
    /// Scaled bottleneck coefficient `w * den - num`, where `num/den = gamma*G`.
    pub coefficient: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcInfo {
    pub clause: String,
    pub head: Arc<str>,
    /// Encoder indices of the latent predicates in the body.
    pub latents: Vec<usize>,
    /// Indices of the atoms this decoder reconstructs.
    pub atoms: Vec<usize>,
    pub true_count: usize,
    pub corruption: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfInfo {
    pub fact: Fact,
    pub in_kb: bool,
}

/// The compiled model. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopModel {
    pub ec: Vec<EcInfo>,
    pub dc: Vec<DcInfo>,
    pub rf: Vec<RfInfo>,
    pub constraints: Vec<Constraint>,
    /// Knowledge-base facts no candidate reconstructs.
    pub constant_offset: usize,
    pub gamma: Ratio,
    pub avg_facts: Ratio,
    /// Input predicates left without any decoder candidate.
    pub uncovered_predicates: Vec<String>,
}

impl CopModel {
    pub fn num_vars(&self) -> usize {
        self.ec.len() + self.dc.len() + self.rf.len()
    }

    pub fn flat(&self, v: VarId) -> usize {
        match v.kind {
            VarKind::Ec => v.index,
            VarKind::Dc => self.ec.len() + v.index,
            VarKind::Rf => self.ec.len() + self.dc.len() + v.index,
        }
    }

    pub fn var(&self, flat: usize) -> VarId {
        let (e, d) = (self.ec.len(), self.dc.len());
        if flat < e {
            VarId::ec(flat)
        } else if flat < e + d {
            VarId::dc(flat - e)
        } else {
            VarId::rf(flat - e - d)
        }
    }

    /// Number of constraints each flat variable occurs in.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vars()];
        for c in &self.constraints {
            for v in c.vars() {
                deg[self.flat(v)] += 1;
            }
        }
        deg
    }

    /// `gamma * G` as an exact rational.
    pub fn bottleneck_bound(&self) -> Ratio {
        self.gamma * self.avg_facts
    }

    /// Line-oriented dump: variables, constraints, objective, offset.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "gamma {}", self.gamma);
        let _ = writeln!(out, "avg_facts {}", self.avg_facts);
        for (i, e) in self.ec.iter().enumerate() {
            let _ = writeln!(out, "var ec{i} weight={} coeff={} % {}", e.weight, e.coefficient, e.clause);
        }
        for (i, d) in self.dc.iter().enumerate() {
            let _ = writeln!(out, "var dc{i} corruption={} % {}", d.corruption, d.clause);
        }
        for (i, r) in self.rf.iter().enumerate() {
            let tag = if r.in_kb { "kb" } else { "not_kb" };
            let _ = writeln!(out, "var rf{i} {tag} % {}", r.fact);
        }
        for c in &self.constraints {
            let _ = writeln!(out, "{c}");
        }
        out.push_str("objective");
        for (i, r) in self.rf.iter().enumerate() {
            if r.in_kb {
                let _ = write!(out, " (1-rf{i})");
            } else {
                let _ = write!(out, " rf{i}");
            }
        }
        out.push('\n');
        let _ = writeln!(out, "offset {}", self.constant_offset);
        out
    }
}

/// Total 0/1 values over a model's variables, by flat index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub values: Vec<bool>,
}

impl Assignment {
    pub fn zeros(model: &CopModel) -> Self {
        Self {
            values: vec![false; model.num_vars()],
        }
    }

    pub fn get(&self, model: &CopModel, v: VarId) -> bool {
        self.values[model.flat(v)]
    }

    pub fn set(&mut self, model: &CopModel, v: VarId, value: bool) {
        let i = model.flat(v);
        self.values[i] = value;
    }

    pub fn selected(&self, model: &CopModel, kind: VarKind) -> Vec<usize> {
        let n = match kind {
            VarKind::Ec => model.ec.len(),
            VarKind::Dc => model.dc.len(),
            VarKind::Rf => model.rf.len(),
        };
        (0..n)
            .filter(|&i| self.get(model, VarId { kind, index: i }))
            .collect()
    }

    /// The feasible-by-construction completion of a decoder selection:
    /// encoders and reconstructions follow from the chosen decoders.
    pub fn from_decoders(model: &CopModel, decoders: &[usize]) -> Self {
        let mut a = Self::zeros(model);
        for &d in decoders {
            a.set(model, VarId::dc(d), true);
            for &e in &model.dc[d].latents {
                a.set(model, VarId::ec(e), true);
            }
            for &r in &model.dc[d].atoms {
                a.set(model, VarId::rf(r), true);
            }
        }
        a
    }
}

fn bottleneck_terms(
    encoders: &[CandidateClause],
    bound: Ratio,
) -> Result<Vec<i64>, ModelError> {
    let (num, den) = (*bound.numer(), *bound.denom());
    encoders
        .iter()
        .map(|e| {
            i64::try_from(e.weight)
                .ok()
                .and_then(|w| w.checked_mul(den))
                .and_then(|x| x.checked_sub(num))
                .ok_or(ModelError::Overflow)
        })
        .collect()
}

/// Pairs `(i, j)`, `i < j`, where one tuple set contains the other, among
/// clauses grouped by `group`.
fn covering_pairs<G: Ord>(clauses: &[CandidateClause], group: impl Fn(&CandidateClause) -> G) -> Vec<(usize, usize)> {
    let mut groups: BTreeMap<G, Vec<usize>> = BTreeMap::new();
    for (i, c) in clauses.iter().enumerate() {
        groups.entry(group(c)).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for members in groups.values() {
        let mut ids: HashMap<&[Constant], usize> = HashMap::new();
        for &i in members {
            for t in clauses[i].tuples() {
                let n = ids.len();
                ids.entry(t).or_insert(n);
            }
        }
        let sets: Vec<FixedBitSet> = members
            .iter()
            .map(|&i| {
                let mut s = FixedBitSet::with_capacity(ids.len());
                for t in clauses[i].tuples() {
                    s.insert(ids[t]);
                }
                s
            })
            .collect();
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                if sets[a].is_subset(&sets[b]) || sets[b].is_subset(&sets[a]) {
                    pairs.push((members[a], members[b]));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Compiles a (pruned) pool into a model at compression level `gamma`.
pub fn build_model(pool: &CandidatePool, kb: &KnowledgeBase, gamma: Ratio) -> Result<CopModel, ModelError> {
    if gamma <= Ratio::from_integer(0) {
        return Err(ModelError::InvalidGamma(gamma));
    }
    let avg_facts = avg_facts_per_predicate(kb)?;
    let bound = gamma.checked_mul(&avg_facts).ok_or(ModelError::Overflow)?;
    let latent_index = pool.encoder_by_latent();

    let mut atom_index: BTreeMap<&Fact, usize> = BTreeMap::new();
    for d in &pool.decoders {
        for f in &d.consequences {
            atom_index.entry(f).or_insert(0);
        }
    }
    for (i, v) in atom_index.values_mut().enumerate() {
        *v = i;
    }
    let rf: Vec<RfInfo> = atom_index
        .keys()
        .map(|f| RfInfo {
            fact: (*f).clone(),
            in_kb: kb.facts().contains(*f),
        })
        .collect();

    let coefficients = bottleneck_terms(&pool.encoders, bound)?;
    let ec: Vec<EcInfo> = pool
        .encoders
        .iter()
        .zip(&coefficients)
        .map(|(e, &coefficient)| EcInfo {
            clause: e.clause.to_string(),
            latent: e.head_name().clone(),
            weight: e.weight,
            coefficient,
        })
        .collect();

    let mut dc = Vec::with_capacity(pool.decoders.len());
    for d in &pool.decoders {
        let mut latents = BTreeSet::new();
        for l in d.clause.body() {
            match latent_index.get(&l.predicate) {
                Some(&i) => {
                    latents.insert(i);
                }
                None => {
                    return Err(ModelError::UndefinedLatent {
                        decoder: d.clause.to_string(),
                        latent: l.predicate.to_string(),
                    })
                }
            }
        }
        let corruption = corruption_level(d, kb).unwrap_or_else(|_| Ratio::from_integer(1));
        dc.push(DcInfo {
            clause: d.clause.to_string(),
            head: d.head_name().clone(),
            latents: latents.into_iter().collect(),
            atoms: d.consequences.iter().map(|f| atom_index[f]).collect(),
            true_count: d.consequences.iter().filter(|f| kb.facts().contains(*f)).count(),
            corruption,
        });
    }

    let mut constraints = Vec::new();
    constraints.push(Constraint::LinearLe {
        terms: coefficients.iter().enumerate().map(|(i, &c)| (c, VarId::ec(i))).collect(),
    });

    let mut users: Vec<Vec<VarId>> = vec![Vec::new(); ec.len()];
    for (j, d) in dc.iter().enumerate() {
        for &e in &d.latents {
            users[e].push(VarId::dc(j));
        }
    }
    for (i, sources) in users.into_iter().enumerate() {
        constraints.push(Constraint::IffOr {
            target: VarId::ec(i),
            sources,
        });
    }

    for (a, b) in covering_pairs(&pool.encoders, |c| c.clause.head().arity()) {
        constraints.push(Constraint::AtMostOnePair(VarId::ec(a), VarId::ec(b)));
    }
    for (a, b) in covering_pairs(&pool.decoders, |c| c.head_name().clone()) {
        constraints.push(Constraint::AtMostOnePair(VarId::dc(a), VarId::dc(b)));
    }

    let mut by_head: BTreeMap<&str, Vec<VarId>> = BTreeMap::new();
    for (j, d) in dc.iter().enumerate() {
        by_head.entry(&d.head).or_default().push(VarId::dc(j));
    }
    let mut uncovered_predicates = Vec::new();
    for p in kb.input_predicates() {
        match by_head.get(p.name.as_ref()) {
            Some(xs) => constraints.push(Constraint::AtLeastOne(xs.clone())),
            None => {
                log::warn!("no decoder candidate has head {p}; skipping its coverage constraint");
                uncovered_predicates.push(p.to_string());
            }
        }
    }

    let mut reconstructors: Vec<Vec<VarId>> = vec![Vec::new(); rf.len()];
    for (j, d) in dc.iter().enumerate() {
        for &r in &d.atoms {
            reconstructors[r].push(VarId::dc(j));
        }
    }
    for (r, sources) in reconstructors.into_iter().enumerate() {
        constraints.push(Constraint::IffOr {
            target: VarId::rf(r),
            sources,
        });
    }

    let constant_offset = kb.facts().iter().filter(|f| !atom_index.contains_key(f)).count();
    Ok(CopModel {
        ec,
        dc,
        rf,
        constraints,
        constant_offset,
        gamma,
        avg_facts,
        uncovered_predicates,
    })
}

/// Constraints the assignment violates, as text.
pub fn check_assignment(model: &CopModel, assignment: &Assignment) -> Vec<String> {
    if assignment.values.len() != model.num_vars() {
        return vec![format!(
            "assignment has {} values for {} variables",
            assignment.values.len(),
            model.num_vars()
        )];
    }
    model
        .constraints
        .iter()
        .filter(|c| !c.holds(|v| assignment.get(model, v)))
        .map(|c| c.to_string())
        .collect()
}

/// Objective without the feasibility check.
pub fn raw_objective(model: &CopModel, assignment: &Assignment) -> usize {
    model.constant_offset
        + model
            .rf
            .iter()
            .enumerate()
            .filter(|(i, r)| assignment.get(model, VarId::rf(*i)) != r.in_kb)
            .count()
}

/// Missing plus false reconstructions for a feasible assignment.
pub fn objective_value(model: &CopModel, assignment: &Assignment) -> Result<usize, ModelError> {
    if assignment.values.len() != model.num_vars() {
        return Err(ModelError::Size {
            expected: model.num_vars(),
            found: assignment.values.len(),
        });
    }
    let violated = check_assignment(model, assignment);
    if !violated.is_empty() {
        return Err(ModelError::Violated(violated));
    }
    Ok(raw_objective(model, assignment))
}

/// The ALP formed by the selected encoder and decoder clauses. `pool` must
/// be the pool the model was built from.
pub fn selected_alp(
    model: &CopModel,
    assignment: &Assignment,
    pool: &CandidatePool,
    kb: &KnowledgeBase,
) -> Result<Alp, ModelError> {
    let encoder = assignment
        .selected(model, VarKind::Ec)
        .into_iter()
        .map(|i| pool.encoders[i].clause.clone())
        .collect();
    let decoder = assignment
        .selected(model, VarKind::Dc)
        .into_iter()
        .map(|i| pool.decoders[i].clause.clone())
        .collect();
    let vocab = |origin: Origin| {
        kb.predicates()
            .filter(|p| p.origin == origin)
            .cloned()
            .collect::<BTreeSet<_>>()
    };
    Ok(Alp::new(encoder, decoder, vocab(Origin::Input), vocab(Origin::Background))?)
}

/// Whether the model objective agrees with the reconstruction loss of the
/// selected ALP evaluated from scratch.
pub fn loss_consistency(model: &CopModel, assignment: &Assignment, pool: &CandidatePool, kb: &KnowledgeBase) -> bool {
    let Ok(objective) = objective_value(model, assignment) else {
        return false;
    };
    match selected_alp(model, assignment, pool, kb) {
        Ok(alp) => logic::reconstruction_loss(&alp, kb) == objective,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{generate_pool, CandidateKind, GenerationConfig};
    use crate::logic::{Clause, FactIndex};
    use crate::pruning::{prune, PruneOptions};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn clause(text: &str) -> Clause {
        Alp::parse(&format!("#encoder\n{text}.")).unwrap().encoder.clauses[0].clone()
    }

    fn cand(text: &str, kind: CandidateKind, facts: &[Fact]) -> CandidateClause {
        let clause = clause(text);
        let consequences = logic::ground_consequences(&clause, &FactIndex::new(facts));
        CandidateClause {
            weight: consequences.len(),
            clause,
            kind,
            consequences,
        }
    }

    fn identity_pool(kb: &KnowledgeBase) -> CandidatePool {
        let facts: Vec<Fact> = kb.facts().iter().cloned().collect();
        let enc = cand("l1(X,Y) :- p(X,Y)", CandidateKind::Encoder, &facts);
        let latent: Vec<Fact> = enc.consequences.iter().cloned().collect();
        let dec = cand("p(X,Y) :- l1(X,Y)", CandidateKind::Decoder, &latent);
        CandidatePool {
            encoders: vec![enc],
            decoders: vec![dec],
        }
    }

    #[test]
    fn reconstruction_iff() {
        let kb = KnowledgeBase::parse("mother(padme,leia). l1(padme,leia). l2(padme).").unwrap();
        let latent = vec![
            Fact::new("l1", &["padme", "leia"]).unwrap(),
            Fact::new("l2", &["padme"]).unwrap(),
        ];
        let encoders = vec![
            cand("l1(X,Y) :- mother(X,Y)", CandidateKind::Encoder, &kb.facts().iter().cloned().collect::<Vec<_>>()),
            cand("l2(X) :- mother(X,Y)", CandidateKind::Encoder, &kb.facts().iter().cloned().collect::<Vec<_>>()),
        ];
        let decoders = vec![
            cand("mother(X,Y) :- l1(X,Y)", CandidateKind::Decoder, &latent),
            cand("mother(X,Y) :- l1(X,Y),l2(X)", CandidateKind::Decoder, &latent),
        ];
        let kb = KnowledgeBase::parse("mother(padme,leia).").unwrap();
        let pool = CandidatePool { encoders, decoders };
        let model = build_model(&pool, &kb, Ratio::new(1, 2)).unwrap();
        assert_eq!(model.rf.len(), 1);
        let defs: Vec<&Constraint> = model
            .constraints
            .iter()
            .filter(|c| matches!(c, Constraint::IffOr { target, .. } if target.kind == VarKind::Rf))
            .collect();
        assert_eq!(
            defs,
            [&Constraint::IffOr {
                target: VarId::rf(0),
                sources: vec![VarId::dc(0), VarId::dc(1)]
            }]
        );
    }

    #[test]
    fn bottleneck_coefficient() {
        let kb = KnowledgeBase::parse(
            "mother(padme,luke). mother(padme,leia). father(vader,luke). father(vader,leia).\n\
             female(padme). female(leia). male(vader). saber(vader,red). saber(luke,green).",
        )
        .unwrap();
        let facts: Vec<Fact> = kb.facts().iter().cloned().collect();
        let enc = cand("l1(X,Y) :- mother(X,Y);father(X,Y)", CandidateKind::Encoder, &facts);
        assert_eq!(enc.weight, 4);
        let latent: Vec<Fact> = enc.consequences.iter().cloned().collect();
        let dec = cand("mother(X,Y) :- l1(X,Y)", CandidateKind::Decoder, &latent);
        let pool = CandidatePool {
            encoders: vec![enc],
            decoders: vec![dec],
        };
        let model = build_model(&pool, &kb, Ratio::new(1, 2)).unwrap();
        assert_eq!(model.bottleneck_bound(), Ratio::new(9, 10));
        // 4 - 9/10 scaled by 10
        assert_eq!(model.ec[0].coefficient, 31);
        let all = Assignment::from_decoders(&model, &[0]);
        assert!(check_assignment(&model, &all).iter().any(|v| v.starts_with("linear_le")));
    }

    #[test]
    fn identity_optimum_is_zero() {
        let kb = KnowledgeBase::parse("p(a,b). p(b,c). q(a).").unwrap();
        let pool = identity_pool(&kb);
        let model = build_model(&pool, &kb, Ratio::from_integer(2)).unwrap();
        // q has no decoder, so its fact is a constant
        assert_eq!(model.constant_offset, 1);
        assert_eq!(model.uncovered_predicates, ["q/1"]);
        let best = (0..2)
            .filter_map(|mask| {
                let sel: Vec<usize> = (0..1).filter(|i| mask >> i & 1 == 1).collect();
                objective_value(&model, &Assignment::from_decoders(&model, &sel)).ok()
            })
            .min();
        assert_eq!(best, Some(1));
        let kb = KnowledgeBase::parse("p(a,b). p(b,c).").unwrap();
        let model = build_model(&identity_pool(&kb), &kb, Ratio::from_integer(2)).unwrap();
        assert_eq!(objective_value(&model, &Assignment::from_decoders(&model, &[0])), Ok(0));
    }

    #[test]
    fn objective_cases() {
        let kb = KnowledgeBase::parse("p(a,b). p(b,c).").unwrap();
        let model = build_model(&identity_pool(&kb), &kb, Ratio::from_integer(2)).unwrap();
        // coverage makes the empty selection infeasible here
        assert!(objective_value(&model, &Assignment::zeros(&model)).is_err());
        assert_eq!(raw_objective(&model, &Assignment::zeros(&model)), 2);

        let mut broken = Assignment::from_decoders(&model, &[0]);
        broken.set(&model, VarId::ec(0), false);
        let v = check_assignment(&model, &broken);
        assert_eq!(v, ["iff_or ec0 dc0"]);

        // one missing (saber(vader,red)) and one false (saber(vader,green))
        let kb = KnowledgeBase::parse("saber(vader,red). saber(luke,green).").unwrap();
        let latent = vec![
            Fact::new("l", &["vader", "green"]).unwrap(),
            Fact::new("l", &["luke", "green"]).unwrap(),
        ];
        let enc = CandidateClause {
            consequences: latent.iter().cloned().collect(),
            weight: 2,
            clause: clause("l(X,Y) :- saber(X,Y)"),
            kind: CandidateKind::Encoder,
        };
        let dec = cand("saber(X,Y) :- l(X,Y)", CandidateKind::Decoder, &latent);
        let model = build_model(
            &CandidatePool {
                encoders: vec![enc],
                decoders: vec![dec],
            },
            &kb,
            Ratio::from_integer(5),
        )
        .unwrap();
        assert_eq!(objective_value(&model, &Assignment::from_decoders(&model, &[0])), Ok(2));
    }

    #[test]
    fn generality_pairs() {
        let latent = vec![
            Fact::new("l1", &["a", "b"]).unwrap(),
            Fact::new("l1", &["b", "c"]).unwrap(),
            Fact::new("l2", &["a"]).unwrap(),
        ];
        let kb = KnowledgeBase::parse("p(a,b). p(b,c). q(a,b).").unwrap();
        let facts: Vec<Fact> = kb.facts().iter().cloned().collect();
        let encoders = vec![
            cand("l1(X,Y) :- p(X,Y)", CandidateKind::Encoder, &facts),
            cand("l2(X) :- q(X,Y)", CandidateKind::Encoder, &facts),
        ];
        let decoders = vec![
            cand("p(X,Y) :- l1(X,Y)", CandidateKind::Decoder, &latent),
            cand("p(X,Y) :- l1(X,Y),l2(X)", CandidateKind::Decoder, &latent),
            cand("q(X,Y) :- l1(X,Y),l2(X)", CandidateKind::Decoder, &latent),
        ];
        let pool = CandidatePool { encoders, decoders };
        let model = build_model(&pool, &kb, Ratio::from_integer(3)).unwrap();
        let pairs: Vec<&Constraint> = model
            .constraints
            .iter()
            .filter(|c| matches!(c, Constraint::AtMostOnePair(..)))
            .collect();
        // dc1 and dc2 have equal tuples but different heads; only dc0/dc1 pair up
        assert_eq!(pairs, [&Constraint::AtMostOnePair(VarId::dc(0), VarId::dc(1))]);
        let both = Assignment::from_decoders(&model, &[0, 1, 2]);
        assert!(check_assignment(&model, &both).contains(&"at_most_one_of_pair dc0 dc1".to_string()));
    }

    #[test]
    fn empty_selection_loss() {
        let kb = KnowledgeBase::parse(
            "mother(padme,luke). mother(padme,leia). father(vader,luke). father(vader,leia).\n\
             female(padme). female(leia). male(vader). saber(vader,red). saber(luke,green).",
        )
        .unwrap();
        let model = build_model(&CandidatePool::default(), &kb, Ratio::new(1, 2)).unwrap();
        let zero = Assignment::zeros(&model);
        assert_eq!(objective_value(&model, &zero), Ok(9));
        assert!(loss_consistency(&model, &zero, &CandidatePool::default(), &kb));
    }

    #[test]
    fn rejects_bad_gamma() {
        let kb = KnowledgeBase::parse("p(a).").unwrap();
        assert!(matches!(
            build_model(&CandidatePool::default(), &kb, Ratio::from_integer(0)),
            Err(ModelError::InvalidGamma(_))
        ));
    }

    #[test]
    fn text_dump() {
        let kb = KnowledgeBase::parse("p(a,b).").unwrap();
        let model = build_model(&identity_pool(&kb), &kb, Ratio::from_integer(1)).unwrap();
        let text = model.to_text();
        for tag in ["var ec0", "var dc0", "var rf0 kb", "linear_le", "iff_or", "at_least_one", "objective (1-rf0)", "offset 0"] {
            assert!(text.contains(tag), "{tag} missing from\n{text}");
        }
    }

    fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
        let c = prop::sample::select(vec!["a", "b", "c", "d"]);
        let atom = (prop::sample::select(vec![("p", 2usize), ("q", 1), ("r", 2)]), prop::collection::vec(c, 2))
            .prop_map(|((n, k), args)| Fact::new(n, &args[..k]).unwrap());
        prop::collection::vec(atom, 1..8).prop_map(|f| KnowledgeBase::from_facts(f).unwrap())
    }

    fn config() -> GenerationConfig {
        GenerationConfig {
            max_encoder_body_len: 1,
            max_decoder_body_len: 2,
            max_head_vars: 1,
            ..Default::default()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn objective_matches_loss_for_random_selections(kb in arb_kb(), seed in any::<u64>(), gamma in 1i64..8) {
            let pool = generate_pool(&kb, &config()).unwrap();
            let (pool, _) = prune(&pool, &kb, PruneOptions::default());
            let model = build_model(&pool, &kb, Ratio::new(gamma, 4)).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let sel: Vec<usize> = (0..model.dc.len()).filter(|_| rng.random_bool(0.3)).collect();
                let a = Assignment::from_decoders(&model, &sel);
                let violations = check_assignment(&model, &a);
                if violations.is_empty() {
                    prop_assert!(loss_consistency(&model, &a, &pool, &kb));
                } else {
                    // only bottleneck, generality and coverage can fail for a derived completion
                    prop_assert!(violations.iter().all(|v| !v.starts_with("iff_or")));
                }
            }
        }

        #[test]
        fn feasible_assignments_respect_ratio_and_coupling(kb in arb_kb(), seed in any::<u64>(), gamma in 1i64..8) {
            let pool = generate_pool(&kb, &config()).unwrap();
            let model = build_model(&pool, &kb, Ratio::new(gamma, 4)).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let sel: Vec<usize> = (0..model.dc.len()).filter(|_| rng.random_bool(0.2)).collect();
                let a = Assignment::from_decoders(&model, &sel);
                if !check_assignment(&model, &a).is_empty() {
                    continue;
                }
                let ecs = a.selected(&model, VarKind::Ec);
                if !ecs.is_empty() {
                    let total: usize = ecs.iter().map(|&i| model.ec[i].weight).sum();
                    prop_assert!(Ratio::new(total as i64, ecs.len() as i64) <= model.bottleneck_bound());
                }
                for d in a.selected(&model, VarKind::Dc) {
                    for &e in &model.dc[d].latents {
                        prop_assert!(a.get(&model, VarId::ec(e)));
                    }
                }
                let covered: BTreeSet<&str> = a.selected(&model, VarKind::Dc).iter().map(|&d| model.dc[d].head.as_ref()).collect();
                for p in kb.input_predicates() {
                    if !model.uncovered_predicates.contains(&p.to_string()) {
                        prop_assert!(covered.contains(p.name.as_ref()));
                    }
                }
            }
        }
    }
}

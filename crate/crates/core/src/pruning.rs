//! Candidate pool reduction.
//!
//! Three passes, in order: encoders that entail the same argument tuples
//! under different latent names collapse to one (decoders that referred to a
//! dropped name are rewritten and deduplicated), decoders with the same head,
//! consequences and body predicates collapse to one, and decoders whose
//! reconstructions are at least half false are dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::candidates::{canonical_clause, CandidateClause, CandidatePool};
use crate::kb::{Constant, KnowledgeBase};
use crate::logic::{Clause, Literal};
use crate::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PruneError {
    #[error("corruption level is undefined for `{0}`, which has no consequences")]
    EmptyConsequences(String),
}

/// Counts per pass. `input_count` reconciles with the removals and the
/// number of survivors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct PruneReport {
    pub input_count: usize,
    pub removed_naming: usize,
    pub removed_signature: usize,
    pub removed_corruption: usize,
    pub survivors: usize,
}

impl PruneReport {
    pub fn removed(&self) -> usize {
        self.removed_naming + self.removed_signature + self.removed_corruption
    }

    /// Share of the input removed, in `[0, 1]`.
    pub fn removed_fraction(&self) -> f64 {
        if self.input_count == 0 {
            0.0
        } else {
            self.removed() as f64 / self.input_count as f64
        }
    }
}

/// Which passes to run. All are on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PruneOptions {
    pub naming: bool,
    pub signature: bool,
    pub corruption: bool,
}

impl Default for PruneOptions {
    fn default() -> Self {
        Self {
            naming: true,
            signature: true,
            corruption: true,
        }
    }
}

impl PruneOptions {
    pub fn none() -> Self {
        Self {
            naming: false,
            signature: false,
            corruption: false,
        }
    }
}

/// Survivors of naming-variant pruning plus the renaming applied to the
/// removed latent predicates.
#[derive(Debug, Clone, Default)]
pub struct NamingOutcome {
    pub survivors: Vec<CandidateClause>,
    pub renamed: BTreeMap<Arc<str>, Arc<str>>,
}

/// Keeps the first encoder of every class of encoders with equal head arity
/// and equal argument tuple sets. Input order is preserved.
pub fn prune_naming_variants(encoders: &[CandidateClause]) -> NamingOutcome {
    let mut seen: HashMap<(usize, BTreeSet<&[Constant]>), Arc<str>> = HashMap::new();
    let mut out = NamingOutcome::default();
    for enc in encoders {
        let key = (enc.clause.head().arity(), enc.tuples());
        match seen.get(&key) {
            Some(rep) => {
                out.renamed.insert(enc.head_name().clone(), rep.clone());
            }
            None => {
                seen.insert(key, enc.head_name().clone());
                out.survivors.push(enc.clone());
            }
        }
    }
    out
}

/// Points decoder bodies at the surviving latent names, drops repeated body
/// literals that the renaming creates, and keeps the first of each group of
/// decoders that become identical up to variable renaming and literal order.
pub fn rewrite_decoders(decoders: &[CandidateClause], renamed: &BTreeMap<Arc<str>, Arc<str>>) -> Vec<CandidateClause> {
    if renamed.is_empty() {
        return decoders.to_vec();
    }
    let mut seen: HashSet<Clause> = HashSet::new();
    let mut out = Vec::new();
    for dec in decoders {
        let touches = dec.clause.body().iter().any(|l| renamed.contains_key(&l.predicate));
        let clause = if touches {
            let mut body: Vec<Literal> = Vec::new();
            for l in dec.clause.body() {
                let mut l = l.clone();
                if let Some(rep) = renamed.get(&l.predicate) {
                    l.predicate = rep.clone();
                }
                if !body.contains(&l) {
                    body.push(l);
                }
            }
            Clause::new(dec.clause.head().clone(), body, dec.clause.connective())
                .expect("renaming keeps clauses range restricted")
        } else {
            dec.clause.clone()
        };
        let clause = canonical_clause(&clause);
        if seen.insert(clause.clone()) {
            out.push(CandidateClause { clause, ..dec.clone() });
        }
    }
    out
}

/// Keeps one decoder per (head predicate, consequences, body predicate set),
/// the one with the least serialization. Survivors keep their input order.
pub fn prune_signature_variants(decoders: &[CandidateClause]) -> Vec<CandidateClause> {
    type Key<'a> = (&'a Arc<str>, usize, &'a BTreeSet<crate::kb::Fact>, BTreeSet<(Arc<str>, usize)>);
    let mut best: HashMap<Key<'_>, (String, usize)> = HashMap::new();
    for (i, dec) in decoders.iter().enumerate() {
        let key = (
            dec.head_name(),
            dec.clause.head().arity(),
            &dec.consequences,
            dec.clause.body_signatures(),
        );
        let text = dec.clause.to_string();
        match best.get_mut(&key) {
            Some(slot) if text < slot.0 => *slot = (text, i),
            Some(_) => {}
            None => {
                best.insert(key, (text, i));
            }
        }
    }
    let keep: BTreeSet<usize> = best.values().map(|(_, i)| *i).collect();
    keep.into_iter().map(|i| decoders[i].clone()).collect()
}

/// Fraction of the decoder's consequences that are not facts of `kb`.
pub fn corruption_level(decoder: &CandidateClause, kb: &KnowledgeBase) -> Result<Ratio, PruneError> {
    let total = decoder.consequences.len();
    if total == 0 {
        return Err(PruneError::EmptyConsequences(decoder.clause.to_string()));
    }
    let false_count = decoder.consequences.iter().filter(|f| !kb.facts().contains(f)).count();
    Ok(Ratio::new(false_count as i64, total as i64))
}

/// Drops decoders at corruption level 1/2 or above.
pub fn prune_corrupt(decoders: &[CandidateClause], kb: &KnowledgeBase) -> Vec<CandidateClause> {
    let half = Ratio::new(1, 2);
    decoders
        .iter()
        .filter(|d| corruption_level(d, kb).is_ok_and(|c| c < half))
        .cloned()
        .collect()
}

/// Runs the selected passes over a freshly generated pool.
pub fn prune(pool: &CandidatePool, kb: &KnowledgeBase, options: PruneOptions) -> (CandidatePool, PruneReport) {
    let mut report = PruneReport {
        input_count: pool.len(),
        ..Default::default()
    };
    let (encoders, decoders) = if options.naming {
        let outcome = prune_naming_variants(&pool.encoders);
        let decoders = rewrite_decoders(&pool.decoders, &outcome.renamed);
        report.removed_naming =
            (pool.encoders.len() - outcome.survivors.len()) + (pool.decoders.len() - decoders.len());
        (outcome.survivors, decoders)
    } else {
        (pool.encoders.clone(), pool.decoders.clone())
    };
    let decoders = if options.signature {
        let kept = prune_signature_variants(&decoders);
        report.removed_signature = decoders.len() - kept.len();
        kept
    } else {
        decoders
    };
    let decoders = if options.corruption {
        let kept = prune_corrupt(&decoders, kb);
        report.removed_corruption = decoders.len() - kept.len();
        kept
    } else {
        decoders
    };
    let pruned = CandidatePool { encoders, decoders };
    report.survivors = pruned.len();
    log::debug!(
        "pruned {} candidates to {} (naming {}, signature {}, corruption {})",
        report.input_count,
        report.survivors,
        report.removed_naming,
        report.removed_signature,
        report.removed_corruption
    );
    (pruned, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{generate_pool, CandidateKind, GenerationConfig};
    use crate::kb::Fact;
    use crate::logic::{self, Alp, FactIndex};
    use proptest::prelude::*;

    fn clause(text: &str) -> Clause {
        Alp::parse(&format!("#encoder\n{text}.")).unwrap().encoder.clauses[0].clone()
    }

    fn candidate(text: &str, kind: CandidateKind, facts: &[Fact]) -> CandidateClause {
        let clause = clause(text);
        let index = FactIndex::new(facts);
        let consequences = logic::ground_consequences(&clause, &index);
        CandidateClause {
            weight: consequences.len(),
            clause,
            kind,
            consequences,
        }
    }

    fn facts(text: &str) -> Vec<Fact> {
        KnowledgeBase::parse(text).unwrap().facts().iter().cloned().collect()
    }

    #[test]
    fn naming_variants() {
        let kb = facts("p(a,b).");
        let enc = |t: &str| candidate(t, CandidateKind::Encoder, &kb);
        let same = prune_naming_variants(&[enc("latent1(X,Y) :- p(X,Y)"), enc("latent2(X,Y) :- p(X,Y)")]);
        assert_eq!(same.survivors.len(), 1);
        assert_eq!(same.renamed.get("latent2").map(|s| s.as_ref()), Some("latent1"));

        let renamed = prune_naming_variants(&[enc("latentA(X) :- p(X,Y)"), enc("latentB(X) :- p(X,Z)")]);
        assert_eq!(renamed.survivors.len(), 1);

        let distinct = prune_naming_variants(&[enc("latent1(X) :- p(X,Y)"), enc("latent2(Y) :- p(X,Y)")]);
        assert_eq!(distinct.survivors.len(), 2);
    }

    #[test]
    fn signature_variants() {
        let latent = facts("l1(a,b). l1(b,b). l2(b). l3(a,b). l3(b,b).");
        let dec = |t: &str| candidate(t, CandidateKind::Decoder, &latent);
        let perm = prune_signature_variants(&[dec("p(X,Y) :- l1(X,Y),l2(Y)"), dec("p(X,Y) :- l2(Y),l1(X,Y)")]);
        assert_eq!(perm.len(), 1);
        assert_eq!(perm[0].clause.to_string(), "p(X,Y) :- l1(X,Y),l2(Y)");

        let a = dec("p(X,Y) :- l1(X,Y)");
        let b = dec("p(X,Y) :- l3(X,Y)");
        assert_eq!(a.consequences, b.consequences);
        assert_eq!(prune_signature_variants(&[a, b]).len(), 2);

        let c = dec("p(X,Y) :- l1(X,Y),l1(Y,Z)");
        let d = dec("p(X,Y) :- l1(X,Y),l1(Z,X)");
        assert_ne!(c.consequences, d.consequences);
        assert_eq!(prune_signature_variants(&[c, d]).len(), 2);
    }

    #[test]
    fn corruption() {
        let kb = KnowledgeBase::parse("p(a,b). q(a).").unwrap();
        let latent = facts("l(a,b). l(a,c). m(x,y).");
        let dec = |t: &str| candidate(t, CandidateKind::Decoder, &latent);
        let clean = dec("p(X,Y) :- l(X,Y),l(X,Y)");
        let clean = CandidateClause {
            consequences: [Fact::new("p", &["a", "b"]).unwrap()].into_iter().collect(),
            ..clean
        };
        let half = dec("p(X,Y) :- l(X,Y)");
        let full = dec("p(X,Y) :- m(X,Y)");
        assert_eq!(corruption_level(&clean, &kb).unwrap(), Ratio::from_integer(0));
        assert_eq!(corruption_level(&half, &kb).unwrap(), Ratio::new(1, 2));
        assert_eq!(corruption_level(&full, &kb).unwrap(), Ratio::from_integer(1));
        let kept = prune_corrupt(&[clean.clone(), half.clone(), full.clone()], &kb);
        assert_eq!(kept, vec![clean]);
        assert!(prune_corrupt(&[half, full.clone()], &kb).is_empty());

        let empty = CandidateClause {
            consequences: BTreeSet::new(),
            ..full
        };
        assert!(corruption_level(&empty, &kb).is_err());
    }

    #[test]
    fn rewritten_decoders_collapse() {
        let latent = facts("l1(a,b). l2(a,b).");
        let dec = |t: &str| candidate(t, CandidateKind::Decoder, &latent);
        let renamed: BTreeMap<Arc<str>, Arc<str>> = [(Arc::from("l2"), Arc::from("l1"))].into_iter().collect();
        let out = rewrite_decoders(
            &[
                dec("p(X,Y) :- l1(X,Y)"),
                dec("p(X,Y) :- l2(X,Y)"),
                dec("p(X,Y) :- l1(X,Y),l2(X,Y)"),
                dec("p(X,Y) :- l2(X,Z),l1(Y,Z)"),
            ],
            &renamed,
        );
        let texts: Vec<String> = out.iter().map(|d| d.clause.to_string()).collect();
        assert_eq!(texts, ["p(X,Y) :- l1(X,Y)", "p(X,Z) :- l1(X,Y),l1(Z,Y)"]);
    }

    fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
        let c = prop::sample::select(vec!["a", "b", "c"]);
        let atom = (prop::sample::select(vec![("p", 2usize), ("q", 1), ("r", 2)]), prop::collection::vec(c, 2))
            .prop_map(|((n, k), args)| Fact::new(n, &args[..k]).unwrap());
        prop::collection::vec(atom, 0..6).prop_map(|mut f| {
            f.push(Fact::new("p", &["a", "b"]).unwrap());
            KnowledgeBase::from_facts(f).unwrap()
        })
    }

    fn small_config() -> GenerationConfig {
        GenerationConfig {
            max_encoder_body_len: 1,
            max_decoder_body_len: 2,
            ..Default::default()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn report_counts_reconcile(kb in arb_kb()) {
            let pool = generate_pool(&kb, &small_config()).unwrap();
            let (pruned, report) = prune(&pool, &kb, PruneOptions::default());
            prop_assert_eq!(report.input_count, report.removed() + report.survivors);
            prop_assert_eq!(report.survivors, pruned.len());
        }

        #[test]
        fn passes_are_idempotent(kb in arb_kb()) {
            let pool = generate_pool(&kb, &small_config()).unwrap();
            let naming = prune_naming_variants(&pool.encoders);
            prop_assert_eq!(prune_naming_variants(&naming.survivors).survivors.len(), naming.survivors.len());
            let rewritten = rewrite_decoders(&pool.decoders, &naming.renamed);
            prop_assert_eq!(rewrite_decoders(&rewritten, &naming.renamed), rewritten.clone());
            let sig = prune_signature_variants(&rewritten);
            prop_assert_eq!(prune_signature_variants(&sig), sig.clone());
            let clean = prune_corrupt(&sig, &kb);
            prop_assert_eq!(prune_corrupt(&clean, &kb), clean.clone());

            let (once, _) = prune(&pool, &kb, PruneOptions::default());
            let (twice, again) = prune(&once, &kb, PruneOptions::default());
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(again.removed(), 0);
        }

        #[test]
        fn naming_relation_is_an_equivalence(kb in arb_kb()) {
            let pool = generate_pool(&kb, &small_config()).unwrap();
            let enc = &pool.encoders;
            let related = |a: &CandidateClause, b: &CandidateClause| {
                a.clause.head().arity() == b.clause.head().arity() && a.tuples() == b.tuples()
            };
            for a in enc {
                prop_assert!(related(a, a));
                for b in enc {
                    prop_assert_eq!(related(a, b), related(b, a));
                    if related(a, b) {
                        for c in enc {
                            if related(b, c) {
                                prop_assert!(related(a, c));
                            }
                        }
                    }
                }
            }
            // each survivor heads a distinct class and every removed clause maps to one
            let naming = prune_naming_variants(enc);
            for (i, a) in naming.survivors.iter().enumerate() {
                for b in &naming.survivors[i + 1..] {
                    prop_assert!(!related(a, b));
                }
            }
            for e in enc {
                prop_assert!(naming.survivors.iter().any(|s| related(s, e)));
            }
        }

        #[test]
        fn rewritten_decoders_keep_consequences(kb in arb_kb()) {
            let pool = generate_pool(&kb, &small_config()).unwrap();
            let naming = prune_naming_variants(&pool.encoders);
            let latent: Vec<&Fact> = naming.survivors.iter().flat_map(|e| e.consequences.iter()).collect();
            let index = FactIndex::new(latent);
            for d in rewrite_decoders(&pool.decoders, &naming.renamed) {
                let recomputed = logic::ground_consequences(&d.clause, &index);
                let shifted: BTreeSet<Vec<Constant>> = recomputed.iter().map(|f| f.args.clone()).collect();
                let stored: BTreeSet<Vec<Constant>> = d.consequences.iter().map(|f| f.args.clone()).collect();
                prop_assert_eq!(shifted, stored);
            }
        }
    }
}

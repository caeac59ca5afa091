//! End-to-end learning and the encode/decode/eval operations on saved
//! models.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::candidates::{generate_pool, GenerationConfig, GenerationError};
use crate::kb::{write_facts, Fact, KbError, KnowledgeBase, Origin, Predicate};
use crate::logic::{self, Alp, LogicError};
use crate::model::{build_model, selected_alp, CopModel, ModelError, VarKind};
use crate::pruning::{prune, PruneOptions, PruneReport};
use crate::solver::{lns_minimize, lns_portfolio, SearchConfig, SolveError, TraceEntry};
use crate::Ratio;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("vocabulary mismatch: {}", .unknown.join(", "))]
    Vocabulary { unknown: Vec<String> },
    #[error("objective {objective} disagrees with recomputed loss {loss}")]
    Audit { objective: usize, loss: usize },
    #[error("invalid compression level `{0}`")]
    Gamma(String),
}

/// Parses a positive decimal or fraction (`0.5`, `1/2`, `2`) exactly.
pub fn parse_gamma(text: &str) -> Result<Ratio, PipelineError> {
    let bad = || PipelineError::Gamma(text.to_string());
    let t = text.trim();
    let r = if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Ratio::new(n, d)
    } else {
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || frac.len() > 12
        {
            return Err(bad());
        }
        let den = 10i64.pow(frac.len() as u32);
        let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        int.checked_mul(den)
            .and_then(|x| x.checked_add(frac))
            .map(|n| Ratio::new(n, den))
            .ok_or_else(bad)?
    };
    if r <= Ratio::from_integer(0) {
        return Err(bad());
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnConfig {
    pub generation: GenerationConfig,
    pub pruning: PruneOptions,
    pub gamma: Ratio,
    pub search: SearchConfig,
    /// Independent searches run in parallel; 1 means a single search.
    pub workers: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            generation: GenerationConfig::default(),
            pruning: PruneOptions::default(),
            gamma: Ratio::new(1, 2),
            search: SearchConfig::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConfigEcho {
    pub generation: GenerationConfig,
    pub pruning: PruneOptions,
    pub gamma: String,
    pub search: SearchConfig,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PoolSize {
    pub encoders: usize,
    pub decoders: usize,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ModelSize {
    pub ec: usize,
    pub dc: usize,
    pub rf: usize,
    pub constraints: usize,
    pub constant_offset: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Improvement {
    pub iteration: u32,
    pub objective: usize,
    pub selected_ec: usize,
    pub selected_dc: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolverSummary {
    pub iterations_run: u32,
    pub fails: u64,
    pub iteration_found: u32,
    pub proven_optimal: bool,
    pub improvements: Vec<Improvement>,
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct Timings {
    pub enumerate_ms: f64,
    pub prune_ms: f64,
    pub build_ms: f64,
    pub search_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub config: ConfigEcho,
    pub candidates_before: PoolSize,
    pub candidates_after: PoolSize,
    pub pruning: PruneReport,
    pub model: ModelSize,
    pub uncovered_predicates: Vec<String>,
    pub solver: SolverSummary,
    pub objective: usize,
    pub reconstruction_loss: usize,
    pub missing: usize,
    pub false_positive: usize,
    pub latent_facts: usize,
    pub latent_predicates: usize,
    pub timings: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// The report with timing fields zeroed, for comparisons across runs.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub alp: Alp,
    pub latent: BTreeSet<Fact>,
    pub model: CopModel,
    pub report: RunReport,
}

impl LearnOutput {
    pub fn model_text(&self) -> String {
        self.alp.to_text()
    }

    pub fn latent_text(&self) -> String {
        write_facts(&self.latent)
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Enumerate, prune, compile, search, and audit the result against an
/// independent evaluation of the learned program.
pub fn learn(
    kb: &KnowledgeBase,
    config: &LearnConfig,
    progress: &mut dyn FnMut(&TraceEntry),
) -> Result<LearnOutput, PipelineError> {
    let t0 = Instant::now();
    let pool = generate_pool(kb, &config.generation)?;
    let t1 = Instant::now();
    let (pruned, prune_report) = prune(&pool, kb, config.pruning);
    let t2 = Instant::now();
    let model = build_model(&pruned, kb, config.gamma)?;
    let t3 = Instant::now();
    log::info!(
        "model: {} ec, {} dc, {} rf, {} constraints",
        model.ec.len(),
        model.dc.len(),
        model.rf.len(),
        model.constraints.len()
    );
    let outcome = if config.workers > 1 {
        let out = lns_portfolio(&model, &config.search, config.workers)?;
        for e in &out.trace {
            progress(e);
        }
        out
    } else {
        lns_minimize(&model, &config.search, progress)?
    };
    let t4 = Instant::now();
    let solution = &outcome.solution;
    let alp = selected_alp(&model, &solution.assignment, &pruned, kb)?;
    let breakdown = logic::loss_breakdown(&alp, kb);
    if breakdown.loss() != solution.objective {
        return Err(PipelineError::Audit {
            objective: solution.objective,
            loss: breakdown.loss(),
        });
    }
    let latent = alp.encode(kb);
    let report = RunReport {
        schema: REPORT_SCHEMA,
        config: ConfigEcho {
            generation: config.generation.clone(),
            pruning: config.pruning,
            gamma: config.gamma.to_string(),
            search: config.search.clone(),
            workers: config.workers,
        },
        candidates_before: PoolSize {
            encoders: pool.encoders.len(),
            decoders: pool.decoders.len(),
        },
        candidates_after: PoolSize {
            encoders: pruned.encoders.len(),
            decoders: pruned.decoders.len(),
        },
        pruning: prune_report,
        model: ModelSize {
            ec: model.ec.len(),
            dc: model.dc.len(),
            rf: model.rf.len(),
            constraints: model.constraints.len(),
            constant_offset: model.constant_offset,
        },
        uncovered_predicates: model.uncovered_predicates.clone(),
        solver: SolverSummary {
            iterations_run: outcome.iterations_run,
            fails: outcome.fails,
            iteration_found: solution.iteration_found,
            proven_optimal: solution.proven_optimal,
            improvements: outcome
                .trace
                .iter()
                .map(|e| Improvement {
                    iteration: e.iteration,
                    objective: e.objective,
                    selected_ec: e.selected_ec,
                    selected_dc: e.selected_dc,
                })
                .collect(),
        },
        objective: solution.objective,
        reconstruction_loss: breakdown.loss(),
        missing: breakdown.missing.len(),
        false_positive: breakdown.false_positive.len(),
        latent_facts: latent.len(),
        latent_predicates: solution.assignment.selected(&model, VarKind::Ec).len(),
        timings: Timings {
            enumerate_ms: ms(t1 - t0),
            prune_ms: ms(t2 - t1),
            build_ms: ms(t3 - t2),
            search_ms: ms(t4 - t3),
            total_ms: ms(t0.elapsed()),
        },
    };
    Ok(LearnOutput {
        alp,
        latent,
        model,
        report,
    })
}

fn mismatches<'a>(
    used: impl Iterator<Item = &'a Predicate>,
    allowed: &BTreeSet<(&str, usize)>,
) -> Vec<String> {
    used.filter(|p| !allowed.contains(&(p.name.as_ref(), p.arity)))
        .map(|p| p.to_string())
        .collect()
}

/// Latent facts for `kb`. Every predicate of `kb` must be an input or
/// background predicate of the model.
pub fn encode(alp: &Alp, kb: &KnowledgeBase) -> Result<BTreeSet<Fact>, PipelineError> {
    let allowed: BTreeSet<(&str, usize)> = alp
        .input_vocabulary
        .iter()
        .chain(&alp.background_vocabulary)
        .map(|p| (p.name.as_ref(), p.arity))
        .collect();
    let unknown = mismatches(kb.predicates(), &allowed);
    if !unknown.is_empty() {
        return Err(PipelineError::Vocabulary { unknown });
    }
    Ok(alp.encode(kb))
}

/// Reconstruction from latent facts, which must use only the model's latent
/// predicates.
pub fn decode(alp: &Alp, latent: &KnowledgeBase) -> Result<BTreeSet<Fact>, PipelineError> {
    let allowed: BTreeSet<(&str, usize)> = alp
        .latent_vocabulary
        .iter()
        .map(|p| (p.name.as_ref(), p.arity))
        .collect();
    let unknown = mismatches(latent.predicates(), &allowed);
    if !unknown.is_empty() {
        return Err(PipelineError::Vocabulary { unknown });
    }
    let facts: BTreeSet<Fact> = latent.facts().iter().chain(latent.background()).cloned().collect();
    Ok(alp.decode(&facts))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct PredicateLoss {
    pub missing: usize,
    pub false_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct EvalReport {
    pub loss: usize,
    pub missing: usize,
    pub false_positive: usize,
    pub per_predicate: BTreeMap<String, PredicateLoss>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "loss\t{}\nmissing\t{}\nfalse\t{}\n",
            self.loss, self.missing, self.false_positive
        );
        for (p, l) in &self.per_predicate {
            out.push_str(&format!("{p}\tmissing={}\tfalse={}\n", l.missing, l.false_positive));
        }
        out
    }
}

pub fn eval(alp: &Alp, kb: &KnowledgeBase) -> Result<EvalReport, PipelineError> {
    encode(alp, kb)?;
    let b = logic::loss_breakdown(alp, kb);
    let mut per_predicate: BTreeMap<String, PredicateLoss> = kb
        .predicates()
        .filter(|p| p.origin != Origin::Background)
        .map(|p| (p.to_string(), PredicateLoss::default()))
        .collect();
    let key = |f: &Fact| format!("{}/{}", f.predicate, f.arity());
    for f in &b.missing {
        per_predicate.entry(key(f)).or_default().missing += 1;
    }
    for f in &b.false_positive {
        per_predicate.entry(key(f)).or_default().false_positive += 1;
    }
    Ok(EvalReport {
        loss: b.loss(),
        missing: b.missing.len(),
        false_positive: b.false_positive.len(),
        per_predicate,
    })
}

/// One point of the hyper-parameter sweep.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct GridCell {
    pub max_encoder_body_len: usize,
    pub max_decoder_body_len: usize,
    pub gamma: String,
}

impl GridCell {
    pub fn label(&self) -> String {
        format!(
            "enc{}_dec{}_gamma{}",
            self.max_encoder_body_len,
            self.max_decoder_body_len,
            self.gamma.replace('/', "-")
        )
    }
}

/// Encoder and decoder lengths in {2, 3} and compression in {0.3, 0.5, 0.7}.
pub fn grid_cells() -> Vec<(GridCell, usize, usize, Ratio)> {
    let mut out = Vec::new();
    for enc in [2, 3] {
        for dec in [2, 3] {
            for (text, gamma) in [("0.3", Ratio::new(3, 10)), ("0.5", Ratio::new(1, 2)), ("0.7", Ratio::new(7, 10))] {
                out.push((
                    GridCell {
                        max_encoder_body_len: enc,
                        max_decoder_body_len: dec,
                        gamma: text.to_string(),
                    },
                    enc,
                    dec,
                    gamma,
                ));
            }
        }
    }
    out
}

/// Runs every grid cell with `base` for the remaining settings. A pool that
/// cannot be generated fails every cell with the same lengths without being
/// regenerated.
pub fn grid(kb: &KnowledgeBase, base: &LearnConfig) -> Vec<(GridCell, Result<LearnOutput, PipelineError>)> {
    let mut failed: BTreeMap<(usize, usize), crate::candidates::GenerationError> = BTreeMap::new();
    grid_cells()
        .into_iter()
        .map(|(cell, enc, dec, gamma)| {
            if let Some(e) = failed.get(&(enc, dec)) {
                return (cell, Err(PipelineError::Generation(e.clone())));
            }
            let config = LearnConfig {
                generation: GenerationConfig {
                    max_encoder_body_len: enc,
                    max_decoder_body_len: dec,
                    ..base.generation.clone()
                },
                gamma,
                ..base.clone()
            };
            log::info!("grid cell {}", cell.label());
            let result = learn(kb, &config, &mut |_| {});
            if let Err(PipelineError::Generation(e)) = &result {
                failed.insert((enc, dec), e.clone());
            }
            (cell, result)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAMILY: &str = "mother(padme,luke). mother(padme,leia). father(vader,luke). father(vader,leia).\n\
        female(padme). female(leia). male(vader). saber(vader,red). saber(luke,green).";

    #[test]
    fn gamma_parsing() {
        assert_eq!(parse_gamma("0.5").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_gamma("0.7").unwrap(), Ratio::new(7, 10));
        assert_eq!(parse_gamma("3/10").unwrap(), Ratio::new(3, 10));
        assert_eq!(parse_gamma("2").unwrap(), Ratio::from_integer(2));
        assert_eq!(parse_gamma(".25").unwrap(), Ratio::new(1, 4));
        for bad in ["0", "-1", "abc", "1/0", "", ".", "0.0"] {
            assert!(parse_gamma(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn identity_instance_is_lossless() {
        let kb = KnowledgeBase::parse("p(a,b). p(b,c). p(c,a).").unwrap();
        let config = LearnConfig {
            gamma: Ratio::from_integer(1),
            ..Default::default()
        };
        let out = learn(&kb, &config, &mut |_| {}).unwrap();
        assert_eq!(out.report.objective, 0);
        assert_eq!(out.alp.encoder.clauses.len(), 1);
        assert_eq!(out.alp.decoder.clauses.len(), 1);
        assert_eq!(decode(&out.alp, &KnowledgeBase::from_facts(out.latent.clone()).unwrap()).unwrap(), *kb.facts());
    }

    /// Four disjoint copies of the family, so that `G = 36/5`.
    fn families() -> KnowledgeBase {
        let text: String = (1..=4)
            .map(|i| {
                FAMILY
                    .replace("padme", &format!("padme{i}"))
                    .replace("luke", &format!("luke{i}"))
                    .replace("leia", &format!("leia{i}"))
                    .replace("vader", &format!("vader{i}"))
                    + "\n"
            })
            .collect();
        KnowledgeBase::parse(&text).unwrap()
    }

    #[test]
    fn literal_family_is_infeasible_at_half() {
        // 9/5 * 1/2 < 1, and every latent predicate entails at least one fact
        let kb = KnowledgeBase::parse(FAMILY).unwrap();
        let err = learn(&kb, &LearnConfig::default(), &mut |_| {}).unwrap_err();
        assert!(matches!(err, PipelineError::Solve(SolveError::Infeasible)), "{err}");
    }

    #[test]
    fn family_respects_bottleneck() {
        let kb = families();
        let config = LearnConfig {
            search: SearchConfig {
                iterations: 50,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = learn(&kb, &config, &mut |_| {}).unwrap();
        let r = &out.report;
        assert_eq!(r.objective, r.reconstruction_loss);
        if r.latent_predicates > 0 {
            let bound = Ratio::new(36, 5) * Ratio::new(1, 2);
            // every selected latent predicate counts, whether it appears in the latent KB or not
            let weights: usize = out
                .alp
                .encoder
                .clauses
                .iter()
                .map(|c| out.latent.iter().filter(|f| f.predicate == c.head().predicate).count())
                .sum();
            assert!(Ratio::new(weights as i64, r.latent_predicates as i64) <= bound);
        }
        let again = learn(&kb, &config, &mut |_| {}).unwrap();
        assert_eq!(again.model_text(), out.model_text());
        assert_eq!(again.latent_text(), out.latent_text());
        assert_eq!(again.report.without_timings().to_json(), r.without_timings().to_json());
    }

    #[test]
    fn vocabulary_checks() {
        let alp = Alp::parse("#input mother/2\n#encoder\nl(X,Y) :- mother(X,Y).\n#decoder\nmother(X,Y) :- l(X,Y).").unwrap();
        let kb = KnowledgeBase::parse("mother(a,b). father(a,b).").unwrap();
        assert!(matches!(encode(&alp, &kb), Err(PipelineError::Vocabulary { .. })));
        assert!(encode(&alp, &KnowledgeBase::new()).unwrap().is_empty());
        let latent = KnowledgeBase::parse("k(a).").unwrap();
        assert!(matches!(decode(&alp, &latent), Err(PipelineError::Vocabulary { .. })));
        assert!(decode(&alp, &KnowledgeBase::new()).unwrap().is_empty());
    }

    #[test]
    fn eval_scenario_and_empty_model() {
        let kb = KnowledgeBase::parse("saber(vader,red). saber(luke,green).").unwrap();
        let alp = Alp::parse(
            "#input saber/2\n#encoder\nl(X) :- saber(X,Y).\nm(Y) :- saber(X,Y).\n#decoder\nsaber(X,Y) :- l(X),m(Y).",
        )
        .unwrap();
        // reconstructs all four pairs, both KB facts among them
        let r = eval(&alp, &kb).unwrap();
        assert_eq!((r.missing, r.false_positive, r.loss), (0, 2, 2));

        // saber(vader,red) goes missing and saber(vader,green) appears
        let kb = KnowledgeBase::parse("saber(vader,red). saber(luke,green). jedi(luke).").unwrap();
        let alp = Alp::parse(
            "#encoder\nwielder(X) :- saber(X,Y).\njedi_colour(Y) :- saber(X,Y),jedi(X).\nknight(X) :- jedi(X).\n\
             #decoder\nsaber(X,Y) :- wielder(X),jedi_colour(Y).\njedi(X) :- knight(X).",
        )
        .unwrap();
        let r = eval(&alp, &kb).unwrap();
        assert_eq!((r.missing, r.false_positive, r.loss), (1, 1, 2));
        let kb = KnowledgeBase::parse("saber(vader,red). saber(luke,green).").unwrap();

        let empty = Alp::parse("#input saber/2\n#encoder\n#decoder\n").unwrap();
        let r = eval(&empty, &kb).unwrap();
        assert_eq!(r.loss, 2);
        assert_eq!(r.per_predicate["saber/2"], PredicateLoss { missing: 2, false_positive: 0 });
    }

    #[test]
    fn grid_has_twelve_cells() {
        let cells = grid_cells();
        assert_eq!(cells.len(), 12);
        let labels: BTreeSet<String> = cells.iter().map(|c| c.0.label()).collect();
        assert_eq!(labels.len(), 12);
    }
}

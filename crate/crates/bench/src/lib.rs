//! Synthetic knowledge bases shared by the benchmarks.

use alp_core::{Fact, KnowledgeBase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random KB over `constants` constants and `predicates` predicates
/// (alternating arity 2 and 1) with `facts` facts.
pub fn synthetic_kb(constants: usize, predicates: usize, facts: usize, seed: u64) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..constants).map(|i| format!("c{i}")).collect();
    let out: Vec<Fact> = (0..facts)
        .map(|_| {
            let p = rng.random_range(0..predicates);
            let arity = if p % 2 == 0 { 2 } else { 1 };
            let args: Vec<&str> = (0..arity).map(|_| names[rng.random_range(0..constants)].as_str()).collect();
            Fact::new(&format!("p{p}"), &args).expect("valid fact")
        })
        .collect();
    KnowledgeBase::from_facts(out).expect("consistent arities")
}

//! Auto-encoding logic programs.
//!
//! An auto-encoding logic program (ALP) is a pair of non-recursive logic
//! programs: an encoder that maps a relational knowledge base onto a latent
//! vocabulary, and a decoder that maps the latent facts back. Learning an
//! ALP means selecting encoder and decoder clauses out of an enumerated
//! candidate pool so that the reconstruction loss (the size of the symmetric
//! difference between the knowledge base and its reconstruction) is minimal
//! while the latent representation respects a compression bottleneck.
//!
//! The crate is organised along the learning pipeline:
//!
//! * [`kb`] parses, indexes and serializes knowledge bases.
//! * [`logic`] represents clauses and programs and evaluates them bottom-up.
//! * [`candidates`] enumerates encoder and decoder clauses under mode bias.
//! * [`pruning`] removes naming variants, signature variants and corrupt decoders.
//! * [`model`] compiles the pool into a boolean constraint optimisation model.
//! * [`solver`] minimises the model with large neighbourhood search.
//! * [`pipeline`] wires everything together and produces run reports.

pub mod candidates;
pub mod kb;
pub mod logic;
pub mod model;
pub mod pipeline;
pub mod pruning;
pub mod solver;
mod syntax;

pub use candidates::{CandidateClause, CandidateKind, CandidatePool, GenerationConfig};
pub use kb::{Constant, Fact, KnowledgeBase, Mode, ModeDeclaration, Origin, Predicate};
pub use logic::{Alp, Clause, Connective, Direction, Literal, LogicProgram, Term, Variable};
pub use model::{Assignment, Constraint, CopModel, VarId, VarKind};
pub use pipeline::{LearnConfig, LearnOutput, RunReport};
pub use pruning::PruneReport;
pub use solver::{SearchConfig, Solution};

/// Exact rational numbers used for `G`, `γ` and corruption levels.
pub type Ratio = num_rational::Ratio<i64>;

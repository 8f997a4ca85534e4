//! Logical-consistency checks between formal meaning representations (SQL
//! queries and logic-form trees) and natural-language text.
//!
//! The crate covers parsing both dialects into one tree type, a keyword
//! lexicon, BLEC bidirectional keyword matching, rule-based logic
//! perturbation, training-set composition, structure-aware linearization
//! and the iterative generator/evaluator loop in [`snowball`].
//!
//! ```
//! use logicheck_core::{match_pair, parse_sql, Lexicon, Utterance};
//!
//! let lexicon = Lexicon::builtin();
//! let query = parse_sql("SELECT avg(age) FROM dogs").unwrap();
//! let ok = match_pair(&query, &Utterance::new("What is the average age of dogs?"), &lexicon);
//! assert!(ok.consistent);
//! let bad = match_pair(&query, &Utterance::new("What is the oldest age of dogs?"), &lexicon);
//! assert_eq!(bad.forward_labels(), ["avg"]);
//! ```

pub mod ast;
pub mod blec;
pub mod compose;
pub mod lexicon;
pub mod linearize;
pub mod parse;
pub mod perturb;
pub mod snowball;
pub mod utterance;

pub use ast::{AstNode, Dialect, NodeKind, NodePath, SemanticParse};
pub use blec::{cohen_kappa, match_pair, pearson, score_corpus, CorpusScore, MatchReport, Pearson};
pub use compose::{
    compose_evaluator_set, compose_generator_set, load_pairs, rerank_beam, save_pairs, AugmentedSample, BeamCandidate,
    Label, LabeledPair, Provenance,
};
pub use lexicon::{load_lexicon, Lexicon};
pub use linearize::{linearize, linearize_with, LinearForm, Templates};
pub use parse::{parse, parse_logic, parse_sql, serialize, Parser, SyntaxError};
pub use perturb::{enumerate_perturbations, PerturbConfig, Perturbation, PerturbationKind};
pub use snowball::{Snowball, SnowballConfig, SnowballError};
pub use utterance::Utterance;

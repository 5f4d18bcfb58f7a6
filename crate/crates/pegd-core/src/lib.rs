//! Derivatives of parsing expression grammars: recognition by iterated
//! derivatives, random and exhaustive sentence generation, grammar analyses
//! (nullability, well-formedness, first sets), and a reference interpreter
//! of the standard recognition semantics used as an independent oracle.
//!
//! The library is organized around a few pieces:
//!
//! - [`expr`]: hash-consed expression algebra with simplifying smart
//!   constructors.
//! - [`grammar`] and [`text`]: grammars and their file format.
//! - [`reference`]: direct transcription of the PEG match relation.
//! - [`derive`]: the derivative function `D` and nullability combinator
//!   `δ`, with memoized, lazily-forced derived rules.
//! - [`analysis`]: Kleene fixed-point engine and ν / WF / first-set
//!   analyses.
//! - [`engine`]: recognition, generation, enumeration, and equivalence
//!   checking built on top.
//! - [`synth`]: seeded random-grammar synthesis and shrinking for
//!   differential testing.

pub mod analysis;
pub mod derive;
pub mod engine;
pub mod error;
pub mod expr;
pub mod grammar;
pub mod reference;
pub mod synth;
pub mod text;

pub use analysis::{fix, BoolLattice, FirstsInfo, FirstsLattice, FixTable, Lattice};
pub use derive::Session;
pub use engine::{
    enumerate, enumerate_with, equiv_check, generate, generate_with, recognize, EquivOutcome,
    FirstsStrategy, GenConfig, GenMode, GenResult, RecognizeMode, Side,
};
pub use error::{Error, Result};
pub use expr::{ExprId, ExprNode, Pool, RuleId, Terminal};
pub use grammar::{escape_sentence, DeriveOp, DerivedCell, Grammar};
pub use reference::{reference_accepts_exact, reference_match, MatchOutcome, DEFAULT_FUEL};
pub use text::{parse_grammar, serialize_grammar};

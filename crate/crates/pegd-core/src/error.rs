//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by grammar parsing, analysis, derivation, and matching.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Syntax error in a grammar file, with 1-based line and column.
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// A `Nonterm` referenced a rule id that is not present in the environment.
    #[error("unbound nonterminal (rule id {0})")]
    UnboundNonterminal(u32),

    /// The reference interpreter ran out of its step budget. Ill-formed
    /// grammars (e.g. left recursion) are caught this way.
    #[error("reference interpreter fuel exhausted (budget {0})")]
    FuelExhausted(u64),

    /// The reference interpreter exceeded its recursion depth limit. Like
    /// fuel exhaustion this signals a non-terminating match, it just trips
    /// before the native stack does.
    #[error("reference interpreter recursion depth limit exceeded ({0})")]
    DepthExceeded(usize),

    /// A fixed-point computation failed to stabilize within its pass budget,
    /// which signals a non-monotone equation system.
    #[error("fixed-point iteration budget exceeded after {passes} passes over {keys} keys")]
    IterationBudgetExceeded { passes: usize, keys: usize },

    /// A derivative was requested for a terminal outside the grammar alphabet.
    #[error("terminal {0:?} is not in the grammar alphabet")]
    TerminalNotInAlphabet(char),

    /// The session hit its cap on derived rules.
    #[error("derived rule budget exhausted (cap {0})")]
    DerivedRuleBudgetExhausted(usize),

    /// An operation that requires a well-formed grammar was given one that
    /// is not (e.g. sentence generation over a left-recursive rule).
    #[error("grammar is not well-formed (rule {0})")]
    IllFormed(String),

    /// Generation or wildcard handling needs at least one terminal.
    #[error("grammar alphabet is empty")]
    EmptyAlphabet,
}

pub type Result<T> = std::result::Result<T, Error>;

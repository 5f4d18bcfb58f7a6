//! Reference interpreter: a direct executable transcription of the
//! recognition-based PEG semantics, used as the independent oracle for the
//! derivative engine.
//!
//! Matching is structural recursion over the sixteen inference rules, with
//! no packrat memoization. A fuel budget (counting rule applications) and a
//! recursion-depth limit guard against ill-formed grammars such as left
//! recursion, which have no finite derivation.

use crate::derive::Session;
use crate::error::{Error, Result};
use crate::expr::{ExprId, ExprNode, Terminal};

/// Default fuel budget per query.
pub const DEFAULT_FUEL: u64 = 1_000_000;

const MAX_DEPTH: usize = 1_000;

/// Outcome of a match: the suffix of the input that was not consumed, or
/// the distinguished failure value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    /// Success; the field is the index where the unconsumed suffix begins
    /// (equivalently, the number of consumed tokens).
    Suffix(usize),
    Failure,
}

impl MatchOutcome {
    pub fn is_success(self) -> bool {
        matches!(self, MatchOutcome::Suffix(_))
    }

    /// The unconsumed suffix of `input`, if the match succeeded.
    pub fn remaining(self, input: &[Terminal]) -> Option<&[Terminal]> {
        match self {
            MatchOutcome::Suffix(at) => Some(&input[at..]),
            MatchOutcome::Failure => None,
        }
    }
}

/// Matches `e` against `input`, resolving nonterminals in the session's
/// environment (forcing derived cells on demand).
pub fn reference_match(
    session: &mut Session,
    e: ExprId,
    input: &[Terminal],
    fuel: u64,
) -> Result<MatchOutcome> {
    let mut fuel = fuel;
    let budget = fuel;
    match step(session, e, input, 0, &mut fuel, 0) {
        Ok(Some(pos)) => Ok(MatchOutcome::Suffix(pos)),
        Ok(None) => Ok(MatchOutcome::Failure),
        Err(Error::FuelExhausted(_)) => Err(Error::FuelExhausted(budget)),
        Err(e) => Err(e),
    }
}

/// True iff `(e, input)` succeeds consuming the entire input.
pub fn reference_accepts_exact(
    session: &mut Session,
    e: ExprId,
    input: &[Terminal],
    fuel: u64,
) -> Result<bool> {
    Ok(reference_match(session, e, input, fuel)? == MatchOutcome::Suffix(input.len()))
}

fn step(
    session: &mut Session,
    e: ExprId,
    input: &[Terminal],
    pos: usize,
    fuel: &mut u64,
    depth: usize,
) -> Result<Option<usize>> {
    if *fuel == 0 {
        return Err(Error::FuelExhausted(0));
    }
    *fuel -= 1;
    if depth >= MAX_DEPTH {
        return Err(Error::DepthExceeded(MAX_DEPTH));
    }
    let depth = depth + 1;
    match session.grammar().pool().node(e) {
        // Empty: (ε, x) ⇒ x
        ExprNode::Empty => Ok(Some(pos)),
        // Terminal: (a, ax) ⇒ x; (a, bx) ⇒ f; (a, ε) ⇒ f
        ExprNode::Term(a) => Ok(if input.get(pos) == Some(&a) {
            Some(pos + 1)
        } else {
            None
        }),
        // Nonterminal: defer to R(A)
        ExprNode::Nonterm(rule) => {
            let body = session.rule_body(rule)?;
            step(session, body, input, pos, fuel, depth)
        }
        // Sequence: thread the suffix; fail if e1 fails
        ExprNode::Seq(e1, e2) => match step(session, e1, input, pos, fuel, depth)? {
            Some(mid) => step(session, e2, input, mid, fuel, depth),
            None => Ok(None),
        },
        // Prioritized choice: e2 only on e1's failure
        ExprNode::Choice(e1, e2) => match step(session, e1, input, pos, fuel, depth)? {
            Some(p) => Ok(Some(p)),
            None => step(session, e2, input, pos, fuel, depth),
        },
        // Star: repeat until the inner expression fails
        ExprNode::Star(inner) => {
            let mut at = pos;
            loop {
                if *fuel == 0 {
                    return Err(Error::FuelExhausted(0));
                }
                *fuel -= 1;
                match step(session, inner, input, at, fuel, depth)? {
                    Some(next) => at = next,
                    None => return Ok(Some(at)),
                }
            }
        }
        // Not-predicate: succeed consuming nothing iff the inner match fails
        ExprNode::Not(inner) => Ok(match step(session, inner, input, pos, fuel, depth)? {
            Some(_) => None,
            None => Some(pos),
        }),
        // And-predicate, as !!e: succeed consuming nothing iff inner succeeds
        ExprNode::And(inner) => Ok(match step(session, inner, input, pos, fuel, depth)? {
            Some(_) => Some(pos),
            None => None,
        }),
        // Wildcard: consume any one token; fail on empty input
        ExprNode::Wildcard => Ok(if pos < input.len() {
            Some(pos + 1)
        } else {
            None
        }),
        // Failing expression
        ExprNode::Fail => Ok(None),
    }
}

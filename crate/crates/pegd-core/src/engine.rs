//! Derivative-based recognition, sentence generation, exhaustive
//! enumeration, and probabilistic grammar-equivalence checking.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive::Session;
use crate::error::{Error, Result};
use crate::expr::{ExprId, ExprNode, Terminal};
use crate::grammar::Grammar;
use crate::reference;

/// Recognition mode: `Exact` asks whether the whole input is a sentence;
/// `Prefix` whether some prefix of it matches (the traditional PEG notion).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecognizeMode {
    Exact,
    Prefix,
}

/// How the generator and enumerator pick candidate branch terminals.
/// `FullAlphabet` ignores the computed first sets; any over-approximation
/// keeps the output correct, it just wastes more work on dead branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstsStrategy {
    Computed,
    FullAlphabet,
}

/// Generation policy.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub max_length: usize,
    /// Derivative steps the whole search may spend before giving up.
    pub step_budget: usize,
    pub mode: GenMode,
    /// Probability of taking an early ε-exit at a nullable expression.
    pub empty_bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    Random,
    /// Deterministic depth-first search in alphabet order, no early ε-exit.
    Exhaustive,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            max_length: 16,
            step_budget: 100_000,
            mode: GenMode::Random,
            empty_bias: 0.25,
        }
    }
}

/// Result of one generation attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenResult {
    Sentence(String),
    Failure,
    BudgetExhausted,
}

/// `x ∈ L(e)`, decided by iterated derivatives: take `D` once per token and
/// test nullability at the end of input.
pub fn recognize(
    session: &mut Session,
    e: ExprId,
    input: &[Terminal],
    mode: RecognizeMode,
) -> Result<bool> {
    let target = match mode {
        RecognizeMode::Exact => e,
        RecognizeMode::Prefix => {
            let sw = session.grammar().pool().star_wild();
            session.grammar_mut().pool_mut().mk_seq(e, sw)
        }
    };
    let d = session.derive_string(input.iter().copied(), target)?;
    session.nullable(d)
}

enum Step {
    Sentence(Vec<Terminal>),
    Failure,
    Out,
}

/// Generates one sentence of `e` according to `cfg`. Requires a well-formed
/// grammar and a non-empty alphabet; deterministic given the same grammar
/// and configuration.
pub fn generate(session: &mut Session, e: ExprId, cfg: &GenConfig) -> Result<GenResult> {
    generate_with(session, e, cfg, FirstsStrategy::Computed)
}

pub fn generate_with(
    session: &mut Session,
    e: ExprId,
    cfg: &GenConfig,
    strategy: FirstsStrategy,
) -> Result<GenResult> {
    if session.grammar().alphabet().is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    if !session.wf_expr(e)? {
        return Err(Error::IllFormed(describe(session.grammar(), e)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut steps = 0usize;
    let outcome = gen_step(session, e, 0, cfg, strategy, &mut rng, &mut steps);
    match outcome {
        Ok(Step::Sentence(tokens)) => Ok(GenResult::Sentence(tokens.into_iter().collect())),
        Ok(Step::Failure) => Ok(GenResult::Failure),
        Ok(Step::Out) | Err(Error::DerivedRuleBudgetExhausted(_)) => Ok(GenResult::BudgetExhausted),
        Err(e) => Err(e),
    }
}

fn gen_step(
    session: &mut Session,
    e: ExprId,
    produced: usize,
    cfg: &GenConfig,
    strategy: FirstsStrategy,
    rng: &mut ChaCha8Rng,
    steps: &mut usize,
) -> Result<Step> {
    let nullable = session.nullable(e)?;
    // Enough output: only the ε-exit remains.
    if produced >= cfg.max_length {
        return Ok(if nullable {
            Step::Sentence(Vec::new())
        } else {
            Step::Failure
        });
    }
    if cfg.mode == GenMode::Random && nullable && cfg.empty_bias > 0.0 && rng.gen_bool(cfg.empty_bias)
    {
        return Ok(Step::Sentence(Vec::new()));
    }
    let mut candidates: Vec<Terminal> = match strategy {
        FirstsStrategy::Computed => session.first_set(e)?.into_iter().collect(),
        FirstsStrategy::FullAlphabet => session.grammar().alphabet().to_vec(),
    };
    if cfg.mode == GenMode::Random {
        candidates.shuffle(rng);
    }
    for a in candidates {
        if *steps >= cfg.step_budget {
            return Ok(Step::Out);
        }
        *steps += 1;
        let d = session.derive(a, e)?;
        match gen_step(session, d, produced + 1, cfg, strategy, rng, steps)? {
            Step::Sentence(mut rest) => {
                rest.insert(0, a);
                return Ok(Step::Sentence(rest));
            }
            Step::Failure => continue,
            Step::Out => return Ok(Step::Out),
        }
    }
    // Every candidate failed; fall back to the ε case.
    Ok(if nullable {
        Step::Sentence(Vec::new())
    } else {
        Step::Failure
    })
}

/// All sentences of `e` up to `max_length` tokens, sorted by length and
/// then lexicographically. Branches whose derivative is the interned
/// failing expression are pruned without being explored.
pub fn enumerate(session: &mut Session, e: ExprId, max_length: usize) -> Result<Vec<String>> {
    enumerate_with(session, e, max_length, FirstsStrategy::Computed)
}

pub fn enumerate_with(
    session: &mut Session,
    e: ExprId,
    max_length: usize,
    strategy: FirstsStrategy,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut prefix = String::new();
    enum_step(session, e, max_length, strategy, &mut prefix, &mut out)?;
    out.sort_by(|a, b| (a.chars().count(), a.as_str()).cmp(&(b.chars().count(), b.as_str())));
    Ok(out)
}

fn enum_step(
    session: &mut Session,
    e: ExprId,
    remaining: usize,
    strategy: FirstsStrategy,
    prefix: &mut String,
    out: &mut Vec<String>,
) -> Result<()> {
    if session.nullable(e)? {
        out.push(prefix.clone());
    }
    if remaining == 0 {
        return Ok(());
    }
    let candidates: Vec<Terminal> = match strategy {
        FirstsStrategy::Computed => session.first_set(e)?.into_iter().collect(),
        FirstsStrategy::FullAlphabet => session.grammar().alphabet().to_vec(),
    };
    let fail = session.grammar().pool().mk_fail();
    for a in candidates {
        let d = session.derive(a, e)?;
        if d == fail {
            continue;
        }
        prefix.push(a);
        enum_step(session, d, remaining - 1, strategy, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

/// Verdict of a probabilistic equivalence check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivOutcome {
    /// No distinguishing input was found within the sampling budget.
    EquivalentUpToBudget,
    /// `input` is accepted by exactly one side.
    Counterexample { input: String, accepted_by: Side },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// Cross-checks two grammars over the union of their alphabets: every
/// string up to length `min(max_length, 4)` exhaustively, then `samples`
/// random sentences from each side membership-tested against the other with
/// the reference interpreter.
pub fn equiv_check(
    g1: &Grammar,
    g2: &Grammar,
    samples: usize,
    max_length: usize,
    seed: u64,
) -> Result<EquivOutcome> {
    let union: Vec<Terminal> = g1
        .alphabet()
        .iter()
        .chain(g2.alphabet().iter())
        .copied()
        .collect();
    let mut left = g1.clone();
    left.extend_alphabet(union.iter().copied());
    let mut right = g2.clone();
    right.extend_alphabet(union.iter().copied());
    let mut left = Session::new(left);
    let mut right = Session::new(right);

    let ls = left.grammar().start();
    let rs = right.grammar().start();
    if !left.wf_expr(ls)? {
        return Err(Error::IllFormed(describe(left.grammar(), ls)));
    }
    if !right.wf_expr(rs)? {
        return Err(Error::IllFormed(describe(right.grammar(), rs)));
    }

    let alphabet: BTreeSet<Terminal> = union.into_iter().collect();
    let alphabet: Vec<Terminal> = alphabet.into_iter().collect();

    // Exhaustive slice first: cheap, deterministic, and it is where small
    // discrepancies live.
    let exhaustive_len = max_length.min(4);
    let mut stack: Vec<Vec<Terminal>> = vec![Vec::new()];
    let mut all: Vec<Vec<Terminal>> = Vec::new();
    while let Some(s) = stack.pop() {
        if s.len() < exhaustive_len {
            for &a in alphabet.iter().rev() {
                let mut next = s.clone();
                next.push(a);
                stack.push(next);
            }
        }
        all.push(s);
    }
    all.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    for input in &all {
        if let Some(cx) = cross_check(&mut left, &mut right, input)? {
            return Ok(cx);
        }
    }

    let mut cfg = GenConfig {
        max_length,
        ..GenConfig::default()
    };
    for i in 0..samples {
        cfg.seed = seed.wrapping_add(i as u64);
        for side in [Side::Left, Side::Right] {
            let produced = match side {
                Side::Left => generate(&mut left, ls, &cfg)?,
                Side::Right => generate(&mut right, rs, &cfg)?,
            };
            if let GenResult::Sentence(sentence) = produced {
                let input: Vec<Terminal> = sentence.chars().collect();
                if let Some(cx) = cross_check(&mut left, &mut right, &input)? {
                    return Ok(cx);
                }
            }
        }
    }
    Ok(EquivOutcome::EquivalentUpToBudget)
}

fn cross_check(
    left: &mut Session,
    right: &mut Session,
    input: &[Terminal],
) -> Result<Option<EquivOutcome>> {
    let ls = left.grammar().start();
    let rs = right.grammar().start();
    let by_left = reference::reference_accepts_exact(left, ls, input, reference::DEFAULT_FUEL)?;
    let by_right = reference::reference_accepts_exact(right, rs, input, reference::DEFAULT_FUEL)?;
    if by_left == by_right {
        return Ok(None);
    }
    Ok(Some(EquivOutcome::Counterexample {
        input: input.iter().collect(),
        accepted_by: if by_left { Side::Left } else { Side::Right },
    }))
}

fn describe(g: &Grammar, e: ExprId) -> String {
    match g.pool().node(e) {
        ExprNode::Nonterm(r) => g.rule_name(r).to_string(),
        _ => g.pretty(e),
    }
}

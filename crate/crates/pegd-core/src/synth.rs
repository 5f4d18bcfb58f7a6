//! Random grammar synthesis and counterexample shrinking, for differential
//! and property testing.
//!
//! The generator is seeded and fully deterministic. `random_wf_grammar`
//! rejection-samples until the result passes the well-formedness analysis;
//! generation is biased so that star bodies and recursive references start
//! with something that must consume input, which keeps the acceptance rate
//! high and keeps the reference interpreter total on the sampled corpus
//! (a star whose body can succeed without consuming — e.g. a bare
//! lookahead — passes the syntactic WF check yet still loops when matched).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive::Session;
use crate::expr::{ExprId, ExprNode, Terminal};
use crate::grammar::Grammar;
use crate::text::{parse_grammar, serialize_grammar};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub max_rules: usize,
    pub alphabet: Vec<Terminal>,
    pub max_depth: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_rules: 8,
            alphabet: vec!['a', 'b', 'c'],
            max_depth: 6,
        }
    }
}

/// A random grammar; may or may not be well-formed.
pub fn random_grammar(cfg: &SynthConfig, seed: u64) -> Grammar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Grammar::new(cfg.alphabet.iter().copied());
    let n_rules = rng.gen_range(1..=cfg.max_rules.max(1));
    let rules: Vec<_> = (0..n_rules)
        .map(|i| g.declare_rule(format!("R{i}")))
        .collect();
    for &rule in &rules {
        let body = random_expr(&mut g, cfg, &mut rng, cfg.max_depth, true);
        g.set_body(rule, body);
    }
    let start = g.pool_mut().mk_nonterm(rules[0]);
    g.set_start(start);
    g
}

/// A random grammar every rule of which passes the WF analysis, found by
/// rejection sampling over successive seeds derived from `seed`.
///
/// Filtering on every rule (not just the start) matters: WF(e1 e2) guards
/// WF(e2) behind `ν(e1) ⇒ …`, so a non-well-formed rule hiding behind a
/// consuming prefix would otherwise slip through.
pub fn random_wf_grammar(cfg: &SynthConfig, seed: u64) -> Grammar {
    for attempt in 0..10_000u64 {
        let g = random_grammar(cfg, mix(seed, attempt));
        let mut session = Session::new(g);
        match session.well_formed() {
            Ok((rules, start)) if start && rules.iter().all(|&(_, wf)| wf) => {
                return session.into_grammar()
            }
            _ => continue,
        }
    }
    unreachable!("rejection sampling failed to find a well-formed grammar")
}

/// A random rule-free expression over `alphabet`, for instantiating the
/// metavariables of algebraic identities.
pub fn random_closed_expr(g: &mut Grammar, alphabet: &[Terminal], rng: &mut ChaCha8Rng, depth: usize) -> ExprId {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        match rng.gen_range(0..10) {
            0 => g.pool().mk_empty(),
            1 => g.pool().mk_wild(),
            2 if rng.gen_bool(0.5) => g.pool().mk_fail(),
            _ => {
                let a = alphabet[rng.gen_range(0..alphabet.len())];
                g.pool_mut().mk_term(a)
            }
        }
    } else {
        match rng.gen_range(0..10) {
            0..=3 => {
                let l = random_closed_expr(g, alphabet, rng, depth - 1);
                let r = random_closed_expr(g, alphabet, rng, depth - 1);
                g.pool_mut().mk_seq(l, r)
            }
            4..=6 => {
                let l = random_closed_expr(g, alphabet, rng, depth - 1);
                let r = random_closed_expr(g, alphabet, rng, depth - 1);
                g.pool_mut().mk_choice(l, r)
            }
            7 => {
                // Keep stars terminating: body = terminal · rest.
                let a = alphabet[rng.gen_range(0..alphabet.len())];
                let t = g.pool_mut().mk_term(a);
                let rest = random_closed_expr(g, alphabet, rng, depth - 1);
                let body = g.pool_mut().mk_seq(t, rest);
                g.pool_mut().mk_star(body)
            }
            8 => {
                let i = random_closed_expr(g, alphabet, rng, depth - 1);
                g.pool_mut().mk_not(i)
            }
            _ => {
                let i = random_closed_expr(g, alphabet, rng, depth - 1);
                g.pool_mut().mk_and(i)
            }
        }
    }
}

fn random_expr(
    g: &mut Grammar,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    depth: usize,
    consuming: bool,
) -> ExprId {
    // `consuming` asks for an expression that must consume input whenever
    // it succeeds; star bodies and recursion guards are built that way.
    if depth == 0 || rng.gen_bool(0.35) {
        return random_leaf(g, cfg, rng, consuming);
    }
    match rng.gen_range(0..12) {
        0..=3 => {
            let guard = consuming && rng.gen_bool(0.8);
            let l = random_expr(g, cfg, rng, depth - 1, guard);
            let r = random_expr(g, cfg, rng, depth - 1, consuming && !guard);
            g.pool_mut().mk_seq(l, r)
        }
        4..=6 => {
            let l = random_expr(g, cfg, rng, depth - 1, consuming);
            let r = random_expr(g, cfg, rng, depth - 1, consuming);
            g.pool_mut().mk_choice(l, r)
        }
        // A star can always match ε, so it never satisfies `consuming`;
        // its body must consume or the star would spin in place.
        7 | 8 if !consuming => {
            let body = random_expr(g, cfg, rng, depth - 1, true);
            g.pool_mut().mk_star(body)
        }
        9 if !consuming => {
            let i = random_expr(g, cfg, rng, depth - 1, false);
            g.pool_mut().mk_not(i)
        }
        10 if !consuming => {
            let i = random_expr(g, cfg, rng, depth - 1, false);
            g.pool_mut().mk_and(i)
        }
        _ => {
            let l = random_leaf(g, cfg, rng, consuming);
            let r = random_expr(g, cfg, rng, depth - 1, false);
            g.pool_mut().mk_seq(l, r)
        }
    }
}

fn random_leaf(g: &mut Grammar, cfg: &SynthConfig, rng: &mut ChaCha8Rng, consuming: bool) -> ExprId {
    if consuming {
        // Terminals and the wildcard are the only leaves that always consume.
        if rng.gen_bool(0.15) {
            return g.pool().mk_wild();
        }
        let a = cfg.alphabet[rng.gen_range(0..cfg.alphabet.len())];
        return g.pool_mut().mk_term(a);
    }
    match rng.gen_range(0..12) {
        0 => g.pool().mk_empty(),
        1 => g.pool().mk_wild(),
        2 => g.pool().mk_fail(),
        3 | 4 if g.rule_count() > 0 => {
            // Guarded reference: a terminal in front keeps recursion
            // productive, which is what well-formedness wants.
            let rule = crate::expr::RuleId((rng.gen_range(0..g.rule_count())) as u32);
            let nt = g.pool_mut().mk_nonterm(rule);
            if rng.gen_bool(0.75) {
                let a = cfg.alphabet[rng.gen_range(0..cfg.alphabet.len())];
                let t = g.pool_mut().mk_term(a);
                g.pool_mut().mk_seq(t, nt)
            } else {
                nt
            }
        }
        _ => {
            let a = cfg.alphabet[rng.gen_range(0..cfg.alphabet.len())];
            g.pool_mut().mk_term(a)
        }
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Every string over `alphabet` with length ≤ `max_len`, shortest first.
pub fn all_strings(alphabet: &[Terminal], max_len: usize) -> Vec<Vec<Terminal>> {
    let mut out: Vec<Vec<Terminal>> = vec![Vec::new()];
    let mut layer: Vec<Vec<Terminal>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for s in &layer {
            for &a in alphabet {
                let mut t = s.clone();
                t.push(a);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Greedy structural shrinking: repeatedly tries syntactic simplifications
/// of the grammar (rewriting a rule body to `''`, `%fail`, or one of its
/// immediate subexpressions) and keeps any variant on which `failing` still
/// returns true. Grammars are rebuilt through text round-trips so the
/// result stays a self-contained counterexample.
pub fn shrink_grammar(g: &Grammar, failing: impl Fn(&Grammar) -> bool) -> Grammar {
    let mut current = g.clone();
    for _round in 0..40 {
        let mut improved = false;
        for rule in current.rule_ids() {
            let Some(body) = current.defined_body(rule) else {
                continue;
            };
            for candidate in replacements(&current, body) {
                let mut variant = current.clone();
                variant.set_body(rule, candidate);
                // Renormalize through text so dead rules and ids stay tidy.
                let Ok(variant) = parse_grammar(&serialize_grammar(&variant)) else {
                    continue;
                };
                if size_of(&variant) < size_of(&current) && failing(&variant) {
                    current = variant;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    current
}

fn replacements(g: &Grammar, body: ExprId) -> Vec<ExprId> {
    let mut out = vec![g.pool().mk_empty(), g.pool().mk_fail()];
    match g.pool().node(body) {
        ExprNode::Seq(l, r) | ExprNode::Choice(l, r) => {
            out.push(l);
            out.push(r);
        }
        ExprNode::Star(i) | ExprNode::Not(i) | ExprNode::And(i) => out.push(i),
        _ => {}
    }
    out.retain(|&e| e != body);
    out
}

fn size_of(g: &Grammar) -> usize {
    serialize_grammar(g).len()
}

/// Shortest input on which `failing` still holds, trying every
/// contiguous subsequence shorter than the original.
pub fn shrink_input(input: &[Terminal], failing: impl Fn(&[Terminal]) -> bool) -> Vec<Terminal> {
    let mut current: Vec<Terminal> = input.to_vec();
    loop {
        let mut improved = false;
        'outer: for len in 0..current.len() {
            for start in 0..=current.len() - len {
                let candidate: Vec<Terminal> = current[start..start + len].to_vec();
                if failing(&candidate) {
                    current = candidate;
                    improved = true;
                    break 'outer;
                }
            }
        }
        if !improved {
            return current;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = SynthConfig::default();
        let a = serialize_grammar(&random_grammar(&cfg, 5));
        let b = serialize_grammar(&random_grammar(&cfg, 5));
        assert_eq!(a, b);
        let c = serialize_grammar(&random_wf_grammar(&cfg, 5));
        let d = serialize_grammar(&random_wf_grammar(&cfg, 5));
        assert_eq!(c, d);
    }

    #[test]
    fn wf_sampling_really_returns_wf() {
        let cfg = SynthConfig::default();
        for seed in 0..50 {
            let g = random_wf_grammar(&cfg, seed);
            let mut s = Session::new(g);
            let start = s.grammar().start();
            assert!(s.wf_expr(start).unwrap());
        }
    }

    #[test]
    fn all_strings_counts() {
        let strings = all_strings(&['a', 'b'], 3);
        assert_eq!(strings.len(), 1 + 2 + 4 + 8);
        assert_eq!(strings[0], Vec::<char>::new());
    }

    #[test]
    fn shrink_input_finds_minimum() {
        let input: Vec<char> = "aabba".chars().collect();
        let shrunk = shrink_input(&input, |s| s.contains(&'b'));
        assert_eq!(shrunk, vec!['b']);
    }

    #[test]
    fn shrink_grammar_reduces() {
        let g = parse_grammar("S <- 'a' 'b' 'c' / 'd' 'e'").unwrap();
        // Pretend any grammar whose language contains "de" is failing.
        let shrunk = shrink_grammar(&g, |g| {
            let mut s = Session::new(g.clone());
            let start = s.grammar().start();
            crate::reference::reference_accepts_exact(
                &mut s,
                start,
                &['d', 'e'],
                crate::reference::DEFAULT_FUEL,
            )
            .unwrap_or(false)
        });
        let text = serialize_grammar(&shrunk);
        assert!(text.len() < serialize_grammar(&g).len(), "{text}");
    }
}

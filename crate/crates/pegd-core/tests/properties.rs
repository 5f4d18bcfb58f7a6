//! Property suites for the analysis, derivative, and engine invariants,
//! driven by the seeded random well-formed corpus.

mod common;

use common::{assert_on_corpus, bruteforce_slice, chars, session_for, wf_corpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pegd_core::synth::{all_strings, random_closed_expr, random_wf_grammar, SynthConfig};
use pegd_core::{
    enumerate, enumerate_with, parse_grammar, recognize, reference_accepts_exact, reference_match,
    serialize_grammar, ExprId, FirstsStrategy, Grammar, MatchOutcome, RecognizeMode, Session,
    DEFAULT_FUEL,
};

const ALPHABET: [char; 3] = ['a', 'b', 'c'];

fn outcome(s: &mut Session, e: ExprId, input: &[char]) -> MatchOutcome {
    reference_match(s, e, input, DEFAULT_FUEL).unwrap()
}

/// ν(e) agrees with "accepts the empty input exactly" on well-formed
/// grammars; 1000 random grammars.
#[test]
fn nullability_matches_empty_input_acceptance() {
    let run = |g: &Grammar| -> Option<String> {
        let mut s = Session::new(g.clone());
        let start = s.grammar().start();
        let nu = s.nullable(start).unwrap();
        let accepts = reference_accepts_exact(&mut s, start, &[], DEFAULT_FUEL).unwrap();
        (nu != accepts).then(|| format!("ν = {nu} but empty-input acceptance = {accepts}"))
    };
    assert_on_corpus("ν ⇔ (e,ε)⇒ε", run);
    let cfg = SynthConfig::default();
    for seed in 1_000..1_500u64 {
        let g = random_wf_grammar(&cfg, seed);
        if let Some(why) = run(&g) {
            panic!("{why} on\n{}", serialize_grammar(&g));
        }
    }
}

/// Grammars whose rules are all judged well-formed never exhaust the
/// reference interpreter's fuel on short inputs. (The per-rule requirement
/// is the right precondition here: WF(e1 e2) only demands WF(e2) when e1
/// is nullable, so a start-only judgment can hide a non-well-formed rule
/// behind a consuming prefix.)
#[test]
fn wf_grammars_are_total_on_short_inputs() {
    let inputs = all_strings(&ALPHABET, 6);
    assert_on_corpus("WF ⇒ reference totality", |g| {
        let mut s = Session::new(g.clone());
        match s.well_formed() {
            Ok((rules, start)) if start && rules.iter().all(|&(_, wf)| wf) => {}
            _ => return None, // outside the precondition (can happen while shrinking)
        }
        let start = s.grammar().start();
        for input in &inputs {
            if let Err(e) = reference_match(&mut s, start, input, DEFAULT_FUEL) {
                return Some(format!("reference_match({input:?}) errored: {e}"));
            }
        }
        None
    });
}

/// Analysis results do not depend on rule order: re-parsing the grammar
/// with its rule lines permuted yields the same per-rule ν / WF / firsts.
#[test]
fn fixpoint_results_are_rule_order_independent() {
    for text in wf_corpus().iter().take(120) {
        let g = parse_grammar(text).unwrap();
        let canonical = serialize_grammar(&g);
        let mut lines: Vec<&str> = canonical.lines().collect();
        let directive_count = lines.iter().filter(|l| l.starts_with('%')).count();
        let baseline = analysis_by_name(&g);
        for variant in 0..2 {
            let rules = &mut lines[directive_count..];
            if variant == 0 {
                rules.reverse();
            } else {
                rules.rotate_left(1.min(rules.len().saturating_sub(1)));
            }
            let permuted_text = lines.join("\n");
            let permuted = parse_grammar(&permuted_text).unwrap();
            let got = analysis_by_name(&permuted);
            assert_eq!(baseline, got, "order-dependent results for\n{canonical}");
        }
    }
}

type NamedAnalysis = Vec<(String, bool, bool, Vec<char>)>;

fn analysis_by_name(g: &Grammar) -> NamedAnalysis {
    let mut s = Session::new(g.clone());
    let mut out = Vec::new();
    let rules: Vec<_> = s.grammar().rule_ids().collect();
    for r in rules {
        let name = s.grammar().rule_name(r).to_string();
        let reference = s.grammar_mut().pool_mut().mk_nonterm(r);
        let nu = s.nullable(reference).unwrap();
        let wf = s.wf_expr(reference).unwrap();
        let firsts: Vec<char> = s.first_set(reference).unwrap().into_iter().collect();
        out.push((name, nu, wf, firsts));
    }
    out.sort();
    out
}

/// `&e` behaves exactly like `!!e` under the reference semantics.
#[test]
fn positive_lookahead_is_double_negation() {
    let mut g = Grammar::new(ALPHABET);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inputs = all_strings(&ALPHABET, 4);
    for _ in 0..100 {
        let e = random_closed_expr(&mut g, &ALPHABET, &mut rng, 3);
        let and_e = g.pool_mut().mk_raw(pegd_core::ExprNode::And(e));
        let not_e = g.pool_mut().mk_raw(pegd_core::ExprNode::Not(e));
        let not_not_e = g.pool_mut().mk_raw(pegd_core::ExprNode::Not(not_e));
        let mut s = Session::new(g.clone());
        for input in &inputs {
            assert_eq!(
                outcome(&mut s, and_e, input),
                outcome(&mut s, not_not_e, input),
                "&e ≠ !!e for e = {} on {input:?}",
                g.pretty(e)
            );
        }
    }
}

/// D_a(!e1 e2) matches exactly like !D_a(e1 _*) D_a(e2).
#[test]
fn derivative_of_guarded_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let inputs = all_strings(&ALPHABET, 4);
    for round in 0..100 {
        let mut g = Grammar::new(ALPHABET);
        let e1 = random_closed_expr(&mut g, &ALPHABET, &mut rng, 3);
        let e2 = random_closed_expr(&mut g, &ALPHABET, &mut rng, 3);
        let not1 = g.pool_mut().mk_not(e1);
        let lhs_src = g.pool_mut().mk_seq(not1, e2);
        let sw = g.pool().star_wild();
        let embedded = g.pool_mut().mk_seq(e1, sw);
        let mut s = Session::new(g);
        for a in ALPHABET {
            let lhs = s.derive(a, lhs_src).unwrap();
            let d_embedded = s.derive(a, embedded).unwrap();
            let guard = s.grammar_mut().pool_mut().mk_not(d_embedded);
            let d2 = s.derive(a, e2).unwrap();
            let rhs = s.grammar_mut().pool_mut().mk_seq(guard, d2);
            for input in &inputs {
                let l = outcome(&mut s, lhs, input);
                let r = outcome(&mut s, rhs, input);
                assert_eq!(
                    l, r,
                    "round {round}: D_{a}(!e1 e2) disagreed on {input:?}\n\
                     e1 = {}\ne2 = {}",
                    s.grammar().pretty(e1),
                    s.grammar().pretty(e2)
                );
            }
        }
    }
}

/// Derivation respects the associativity of sequencing.
#[test]
fn derivative_respects_seq_associativity() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let inputs = all_strings(&ALPHABET, 4);
    for _ in 0..100 {
        let mut g = Grammar::new(ALPHABET);
        let e1 = random_closed_expr(&mut g, &ALPHABET, &mut rng, 2);
        let e2 = random_closed_expr(&mut g, &ALPHABET, &mut rng, 2);
        let e3 = random_closed_expr(&mut g, &ALPHABET, &mut rng, 2);
        let e12 = g.pool_mut().mk_seq(e1, e2);
        let left_nested = g.pool_mut().mk_seq(e12, e3);
        let e23 = g.pool_mut().mk_seq(e2, e3);
        let right_nested = g.pool_mut().mk_seq(e1, e23);
        let mut s = Session::new(g);
        for a in ALPHABET {
            let dl = s.derive(a, left_nested).unwrap();
            let dr = s.derive(a, right_nested).unwrap();
            for input in &inputs {
                assert_eq!(
                    outcome(&mut s, dl, input),
                    outcome(&mut s, dr, input),
                    "associativity broken for a={a} on {input:?}: {} vs {}",
                    s.grammar().pretty(left_nested),
                    s.grammar().pretty(right_nested)
                );
            }
        }
    }
}

/// D_a(e1/e2) matches exactly like D_a(e1 / !e1 e2): the bias of choice is
/// already accounted for.
#[test]
fn derivative_of_prioritized_choice() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let inputs = all_strings(&ALPHABET, 4);
    for _ in 0..100 {
        let mut g = Grammar::new(ALPHABET);
        let e1 = random_closed_expr(&mut g, &ALPHABET, &mut rng, 3);
        let e2 = random_closed_expr(&mut g, &ALPHABET, &mut rng, 3);
        let plain = g.pool_mut().mk_choice(e1, e2);
        // Build the guarded variant raw: the smart constructors would
        // collapse it straight back to `plain`.
        let not1 = g.pool_mut().mk_not(e1);
        let guarded_tail = g.pool_mut().mk_raw(pegd_core::ExprNode::Seq(not1, e2));
        let guarded = g
            .pool_mut()
            .mk_raw(pegd_core::ExprNode::Choice(e1, guarded_tail));
        let mut s = Session::new(g);
        for a in ALPHABET {
            let dp = s.derive(a, plain).unwrap();
            let dg = s.derive(a, guarded).unwrap();
            for input in &inputs {
                assert_eq!(
                    outcome(&mut s, dp, input),
                    outcome(&mut s, dg, input),
                    "choice bias broken for a={a} on {input:?}: e1 = {}, e2 = {}",
                    s.grammar().pretty(e1),
                    s.grammar().pretty(e2)
                );
            }
        }
    }
}

/// The derivative agrees with the match relation step by step:
/// (e, ax) ⇒ y iff (D_a e, x) ⇒ y.
#[test]
fn derivative_steps_track_reference_matching() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let short = all_strings(&ALPHABET, 3);
    for text in wf_corpus().iter().take(150) {
        let g = parse_grammar(text).unwrap();
        let mut s = Session::new(g);
        let start = s.grammar().start();
        let mut inputs = short.clone();
        for _ in 0..12 {
            let len = rng.gen_range(4..=5);
            inputs.push((0..len).map(|_| ALPHABET[rng.gen_range(0..3)]).collect());
        }
        for input in &inputs {
            if input.is_empty() {
                continue;
            }
            let a = input[0];
            let o_whole = outcome(&mut s, start, input);
            let d = s.derive(a, start).unwrap();
            let o_stepped = reference_match(&mut s, d, &input[1..], DEFAULT_FUEL).unwrap();
            let agree = match (o_whole, o_stepped) {
                (MatchOutcome::Suffix(k), MatchOutcome::Suffix(j)) if k >= 1 => j == k - 1,
                // Consuming nothing (or failing) on axy means the stepped
                // match must fail, and vice versa.
                (MatchOutcome::Suffix(_), o) | (MatchOutcome::Failure, o) => {
                    o == MatchOutcome::Failure
                }
            };
            assert!(
                agree,
                "stepping mismatch on {input:?}: whole = {o_whole:?}, after D_{a} = {o_stepped:?}\n{}",
                serialize_grammar(s.grammar())
            );
        }
    }
}

/// Replacing the computed first sets by the whole alphabet changes nothing
/// about what enumeration finds, only how hard it works.
#[test]
fn first_set_pruning_is_only_an_optimization() {
    assert_on_corpus("firsts over-approximation robustness", |g| {
        let mut s1 = Session::new(g.clone());
        let e1 = s1.grammar().start();
        let pruned = enumerate(&mut s1, e1, 4).unwrap();
        let mut s2 = Session::new(g.clone());
        let e2 = s2.grammar().start();
        let full = enumerate_with(&mut s2, e2, 4, FirstsStrategy::FullAlphabet).unwrap();
        (pruned != full).then(|| {
            format!(
                "enumerate disagreed: pruned found {} sentences, full scan {}",
                pruned.len(),
                full.len()
            )
        })
    });
}

/// Derivation terminates (via memoized cells) even on grammars that are
/// not well-formed, including self-referential lookahead.
#[test]
fn derivation_terminates_on_pathological_grammars() {
    for src in [
        "S <- !S 'a'",
        "S <- 'b' !S 'a'",
        "X <- X 'x' / ''",
        "A <- !A",
        "S <- &S 'a' / 'b'",
    ] {
        let mut s = Session::new(parse_grammar(src).unwrap());
        let start = s.grammar().start();
        let alphabet = s.grammar().alphabet().to_vec();
        let mut exprs = vec![start];
        for a in alphabet {
            let d = s.derive(a, start).unwrap();
            let n = s.delta(a, start).unwrap();
            exprs.push(d);
            exprs.push(n);
        }
        for e in exprs {
            // Forcing every reachable cell must come to rest.
            let _ = s.serialize_env(e).unwrap();
            let _ = s.nullable(e).unwrap();
        }
    }
    for name in [
        "example1.peg",
        "example2.peg",
        "example3.peg",
        "anbncn.peg",
        "anbn.peg",
        "keyword.peg",
        "leftrec.peg",
        "rightrec.peg",
    ] {
        let mut s = session_for(name);
        let start = s.grammar().start();
        for a in s.grammar().alphabet().to_vec() {
            let d = s.derive(a, start).unwrap();
            let _ = s.nullable(d).unwrap();
        }
    }
}

/// Round trip: parsing canonical text back reproduces the same canonical
/// text and an isomorphic rule table.
#[test]
fn serialize_parse_round_trip() {
    for text in wf_corpus() {
        let g = parse_grammar(text).unwrap();
        let canonical = serialize_grammar(&g);
        let reparsed = parse_grammar(&canonical).unwrap();
        assert_eq!(canonical, serialize_grammar(&reparsed));
        assert_eq!(g.alphabet(), reparsed.alphabet());
        for r in g.rule_ids() {
            let name = g.rule_name(r);
            let r2 = reparsed
                .lookup_rule(name)
                .unwrap_or_else(|| panic!("rule {name} lost in round trip"));
            assert_eq!(
                g.pretty(g.defined_body(r).unwrap()),
                reparsed.pretty(reparsed.defined_body(r2).unwrap())
            );
        }
    }
}

/// Exact-mode recognition and prefix-mode recognition both agree with the
/// oracle on the corpus files (the random-corpus version lives in the
/// acceptance suite).
#[test]
fn corpus_files_recognition_agreement() {
    for name in ["example3.peg", "anbncn.peg", "anbn.peg", "keyword.peg", "rightrec.peg"] {
        let mut s = session_for(name);
        let start = s.grammar().start();
        let alphabet = s.grammar().alphabet().to_vec();
        for input in all_strings(&alphabet, 4) {
            let exact = recognize(&mut s, start, &input, RecognizeMode::Exact).unwrap();
            let oracle = reference_accepts_exact(&mut s, start, &input, DEFAULT_FUEL).unwrap();
            assert_eq!(exact, oracle, "{name} exact mismatch on {input:?}");

            let prefix = recognize(&mut s, start, &input, RecognizeMode::Prefix).unwrap();
            let prefix_oracle = reference_match(&mut s, start, &input, DEFAULT_FUEL)
                .unwrap()
                .is_success();
            assert_eq!(prefix, prefix_oracle, "{name} prefix mismatch on {input:?}");
        }
    }
}

/// The suffix returned by a successful match is always a suffix of the
/// input reached by consuming a prefix.
#[test]
fn match_outcome_prefix_law() {
    let mut s = session_for("anbncn.peg");
    let start = s.grammar().start();
    for input in all_strings(&['a', 'b', 'c'], 4) {
        if let MatchOutcome::Suffix(k) = outcome(&mut s, start, &input) {
            assert!(k <= input.len());
            assert_eq!(
                MatchOutcome::Suffix(k).remaining(&input).unwrap(),
                &input[k..]
            );
        }
    }
}

#[test]
fn keyword_lookahead_blocks_prefixes() {
    let mut s = session_for("keyword.peg");
    let start = s.grammar().start();
    assert!(recognize(&mut s, start, &chars("ab"), RecognizeMode::Exact).unwrap());
    for bad in ["aba", "abb", "a", "b", ""] {
        assert!(
            !recognize(&mut s, start, &chars(bad), RecognizeMode::Exact).unwrap(),
            "{bad:?} should be rejected"
        );
    }
}

#[test]
fn bruteforce_slice_smoke() {
    let g = common::load_grammar("anbn.peg");
    assert_eq!(bruteforce_slice(&g, 4), vec!["", "ab", "aabb"]);
}

//! Shared helpers for the integration and acceptance suites.

use std::path::PathBuf;
use std::sync::OnceLock;

use pegd_core::synth::{all_strings, random_wf_grammar, shrink_grammar, SynthConfig};
use pegd_core::{
    parse_grammar, reference_accepts_exact, serialize_grammar, Grammar, Session, DEFAULT_FUEL,
};

pub const CORPUS_SIZE: usize = 500;

pub fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

pub fn grammars_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../grammars")
}

pub fn load_grammar(name: &str) -> Grammar {
    let path = grammars_dir().join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    parse_grammar(&text).unwrap_or_else(|e| panic!("cannot parse {name}: {e}"))
}

pub fn session_for(name: &str) -> Session {
    Session::new(load_grammar(name))
}

/// The randomly synthesized well-formed corpus shared by the property
/// suites, stored as canonical text (each use re-parses into a fresh pool).
pub fn wf_corpus() -> &'static [String] {
    static CORPUS: OnceLock<Vec<String>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let cfg = SynthConfig::default();
        (0..CORPUS_SIZE as u64)
            .map(|seed| serialize_grammar(&random_wf_grammar(&cfg, seed)))
            .collect()
    })
}

/// The exact language slice of the grammar's start expression up to
/// `max_len`, computed by brute force with the reference interpreter.
pub fn bruteforce_slice(g: &Grammar, max_len: usize) -> Vec<String> {
    let mut session = Session::new(g.clone());
    let start = session.grammar().start();
    let mut out = Vec::new();
    for s in all_strings(g.alphabet(), max_len) {
        if reference_accepts_exact(&mut session, start, &s, DEFAULT_FUEL).unwrap() {
            out.push(s.into_iter().collect());
        }
    }
    out
}

/// Checks `prop` on every corpus grammar. `prop` returns `Some(why)` when
/// the grammar violates the property and `None` when it passes (including
/// on grammars outside the property's precondition, so shrinking stays
/// inside it). Failures are shrunk before being reported.
pub fn assert_on_corpus(name: &str, prop: impl Fn(&Grammar) -> Option<String>) {
    for (i, text) in wf_corpus().iter().enumerate() {
        let g = parse_grammar(text).unwrap();
        if let Some(why) = prop(&g) {
            let shrunk = shrink_grammar(&g, |candidate| prop(candidate).is_some());
            let why_small = prop(&shrunk).unwrap_or_else(|| why.clone());
            panic!(
                "{name} failed on corpus grammar #{i}: {why}\n\
                 shrunk counterexample:\n{}\non which: {why_small}",
                serialize_grammar(&shrunk)
            );
        }
    }
}

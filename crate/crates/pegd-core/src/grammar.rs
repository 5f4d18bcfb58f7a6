//! Grammars: a finite alphabet, a rule table, and a start expression.
//!
//! Rule bodies are either `Defined` (written by the user or by a finished
//! derivation) or a lazily evaluated [`DerivedCell`] allocated while taking
//! derivatives. Cells are write-once: forcing one never changes an already
//! forced body.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expr::{ExprId, ExprNode, Pool, RuleId, Terminal};

/// Which derivative operator a derived rule stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeriveOp {
    /// The derivative function `D`.
    Deriv,
    /// The nullability combinator `δ`.
    Delta,
}

/// Recipe for the body of a lazily computed derived rule: apply `op` with
/// respect to `terminal` to the expression `source` (a nonterminal reference
/// or a star node).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRecipe {
    pub op: DeriveOp,
    pub source: ExprId,
    pub terminal: Terminal,
}

/// State of a derived rule body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivedCell {
    /// Not yet computed.
    Unforced(CellRecipe),
    /// Currently being computed. A re-entrant demand during this window is
    /// answered with a `Nonterm` of the cell's own rule id, which is what
    /// turns the self-referential derivative equations into recursive rules.
    Forcing(CellRecipe),
    /// Computed; the body never changes afterwards.
    Forced(ExprId),
}

#[derive(Debug, Clone)]
pub enum RuleBody {
    Defined(ExprId),
    Cell(DerivedCell),
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub body: RuleBody,
}

/// A parsing expression grammar plus the pool its expressions live in.
#[derive(Debug, Clone)]
pub struct Grammar {
    pool: Pool,
    rules: Vec<Rule>,
    by_name: HashMap<String, RuleId>,
    alphabet: Vec<Terminal>, // sorted, distinct
    start: ExprId,
}

impl Grammar {
    /// An empty grammar over the given alphabet. Symbols are deduplicated
    /// and sorted. The start expression defaults to `ε` until set.
    pub fn new<I: IntoIterator<Item = Terminal>>(alphabet: I) -> Self {
        let mut alpha: Vec<Terminal> = alphabet.into_iter().collect();
        alpha.sort_unstable();
        alpha.dedup();
        let pool = Pool::new();
        let start = pool.mk_empty();
        Grammar {
            pool,
            rules: Vec::new(),
            by_name: HashMap::new(),
            alphabet: alpha,
            start,
        }
    }

    pub fn pool(&self) -> &Pool {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut Pool {
        &mut self.pool
    }

    pub fn alphabet(&self) -> &[Terminal] {
        &self.alphabet
    }

    pub fn has_symbol(&self, a: Terminal) -> bool {
        self.alphabet.binary_search(&a).is_ok()
    }

    /// Extends the alphabet with extra symbols (used when comparing grammars
    /// that were written over different alphabets).
    pub fn extend_alphabet<I: IntoIterator<Item = Terminal>>(&mut self, symbols: I) {
        self.alphabet.extend(symbols);
        self.alphabet.sort_unstable();
        self.alphabet.dedup();
    }

    pub fn start(&self) -> ExprId {
        self.start
    }

    pub fn set_start(&mut self, e: ExprId) {
        self.start = e;
    }

    /// Declares a rule with a placeholder `ε` body, returning its id.
    /// Bodies can then reference the rule recursively before `set_body`.
    pub fn declare_rule(&mut self, name: impl Into<String>) -> RuleId {
        let name = name.into();
        debug_assert!(!self.by_name.contains_key(&name), "duplicate rule {name}");
        let id = RuleId(self.rules.len() as u32);
        self.by_name.insert(name.clone(), id);
        let body = RuleBody::Defined(self.pool.mk_empty());
        self.rules.push(Rule { name, body });
        id
    }

    pub fn set_body(&mut self, rule: RuleId, body: ExprId) {
        self.rules[rule.index()].body = RuleBody::Defined(body);
    }

    pub(crate) fn push_cell(&mut self, name: String, recipe: CellRecipe) -> RuleId {
        let id = RuleId(self.rules.len() as u32);
        self.by_name.insert(name.clone(), id);
        self.rules.push(Rule {
            name,
            body: RuleBody::Cell(DerivedCell::Unforced(recipe)),
        });
        id
    }

    pub(crate) fn cell_mut(&mut self, rule: RuleId) -> &mut RuleBody {
        &mut self.rules[rule.index()].body
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn rule_ids(&self) -> impl Iterator<Item = RuleId> {
        (0..self.rules.len() as u32).map(RuleId)
    }

    pub fn rule_name(&self, rule: RuleId) -> &str {
        &self.rules[rule.index()].name
    }

    pub fn rule(&self, rule: RuleId) -> Option<&Rule> {
        self.rules.get(rule.index())
    }

    pub fn lookup_rule(&self, name: &str) -> Option<RuleId> {
        self.by_name.get(name).copied()
    }

    pub fn fresh_rule_name(&self, wanted: &str) -> String {
        if !self.by_name.contains_key(wanted) {
            return wanted.to_string();
        }
        let mut n = 0usize;
        loop {
            let candidate = format!("{wanted}_{n}");
            if !self.by_name.contains_key(&candidate) {
                return candidate;
            }
            n += 1;
        }
    }

    /// The body of a `Defined` rule; `None` for derived cells (use a session
    /// to force those) and out-of-range ids.
    pub fn defined_body(&self, rule: RuleId) -> Option<ExprId> {
        match self.rules.get(rule.index())?.body {
            RuleBody::Defined(e) => Some(e),
            RuleBody::Cell(DerivedCell::Forced(e)) => Some(e),
            RuleBody::Cell(_) => None,
        }
    }

    pub(crate) fn check_rule(&self, rule: RuleId) -> Result<()> {
        if rule.index() < self.rules.len() {
            Ok(())
        } else {
            Err(Error::UnboundNonterminal(rule.0))
        }
    }

    /// Canonical minimal-parenthesis rendering of an expression.
    ///
    /// Panics on a rule id outside this grammar: that is an internal
    /// invariant violation, not a user error.
    pub fn pretty(&self, e: ExprId) -> String {
        let mut out = String::new();
        self.render(e, Prec::Choice, &mut out);
        out
    }

    fn render(&self, e: ExprId, ctx: Prec, out: &mut String) {
        let prec = self.prec_of(e);
        let parens = prec < ctx;
        if parens {
            out.push('(');
        }
        match self.pool.node(e) {
            ExprNode::Empty => out.push_str("''"),
            ExprNode::Fail => out.push_str("%fail"),
            ExprNode::Wildcard => out.push('.'),
            ExprNode::Term(a) => {
                out.push('\'');
                out.push_str(&escape_char(a));
                out.push('\'');
            }
            ExprNode::Nonterm(r) => out.push_str(self.rule_name(r)),
            ExprNode::Seq(l, r) => {
                self.render(l, Prec::Prefix, out);
                out.push(' ');
                self.render(r, Prec::Seq, out);
            }
            ExprNode::Choice(l, r) => {
                self.render(l, Prec::Seq, out);
                out.push_str(" / ");
                self.render(r, Prec::Choice, out);
            }
            ExprNode::Star(inner) => {
                self.render(inner, Prec::Postfix, out);
                out.push('*');
            }
            ExprNode::Not(inner) => {
                out.push('!');
                self.render(inner, Prec::Postfix, out);
            }
            ExprNode::And(inner) => {
                out.push('&');
                self.render(inner, Prec::Postfix, out);
            }
        }
        if parens {
            out.push(')');
        }
    }

    fn prec_of(&self, e: ExprId) -> Prec {
        match self.pool.node(e) {
            ExprNode::Choice(..) => Prec::Choice,
            ExprNode::Seq(..) => Prec::Seq,
            ExprNode::Not(_) | ExprNode::And(_) => Prec::Prefix,
            ExprNode::Star(_) => Prec::Postfix,
            _ => Prec::Atom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Choice = 0,
    Seq = 1,
    Prefix = 2,
    Postfix = 3,
    Atom = 4,
}

/// Escapes one character for use inside a single-quoted literal.
pub fn escape_char(c: char) -> String {
    match c {
        '\'' => "\\'".to_string(),
        '\\' => "\\\\".to_string(),
        '\n' => "\\n".to_string(),
        '\t' => "\\t".to_string(),
        c if (c as u32) < 0x20 || c as u32 == 0x7f => format!("\\x{:02X}", c as u32),
        c => c.to_string(),
    }
}

/// Escapes a sentence for one-per-line output: backslash, newline, tab and
/// other control characters are escaped, everything else is verbatim.
pub fn escape_sentence(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                out.push_str(&format!("\\x{:02X}", c as u32))
            }
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Grammar {
        Grammar::new(['a', 'b', 'c'])
    }

    #[test]
    fn pretty_examples() {
        let mut g = g();
        let b = g.pool_mut().mk_term('b');
        let c = g.pool_mut().mk_term('c');
        let bc = g.pool_mut().mk_seq(b, c);
        let and_bc = g.pool_mut().mk_and(bc);
        let w = g.pool_mut().mk_wild();
        let ww = g.pool_mut().mk_seq(w, w);
        let e = g.pool_mut().mk_seq(and_bc, ww);
        assert_eq!(g.pretty(e), "&('b' 'c') . .");

        let eps = g.pool_mut().mk_empty();
        assert_eq!(g.pretty(eps), "''");

        let a = g.pool_mut().mk_term('a');
        let bs = g.pool_mut().mk_star(b);
        let ch = g.pool_mut().mk_choice(a, bs);
        assert_eq!(g.pretty(ch), "'a' / 'b'*");
    }

    #[test]
    fn pretty_parenthesizes_only_when_needed() {
        let mut g = g();
        let a = g.pool_mut().mk_term('a');
        let b = g.pool_mut().mk_term('b');
        let ab = g.pool_mut().mk_choice(a, b);
        let star = g.pool_mut().mk_star(ab);
        assert_eq!(g.pretty(star), "('a' / 'b')*");

        let na = g.pool_mut().mk_not(a);
        let nastar = g.pool_mut().mk_star(na);
        assert_eq!(g.pretty(nastar), "(!'a')*");

        let r = g.declare_rule("S");
        let nt = g.pool_mut().mk_nonterm(r);
        let seq = g.pool_mut().mk_seq(a, nt);
        let seq2 = g.pool_mut().mk_seq(seq, b);
        assert_eq!(g.pretty(seq2), "('a' S) 'b'");
    }

    #[test]
    fn escaping() {
        assert_eq!(escape_char('a'), "a");
        assert_eq!(escape_char('\''), "\\'");
        assert_eq!(escape_char('\n'), "\\n");
        assert_eq!(escape_char('\x01'), "\\x01");
        assert_eq!(escape_sentence("a\nb\\"), "a\\nb\\\\");
    }
}

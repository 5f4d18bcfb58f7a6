//! The grammar file format: parsing and canonical serialization.
//!
//! ```text
//! # comments run to end of line
//! %alphabet 'a' 'b' 'c'
//! %start S
//! S <- 'a' S 'b' / ''
//! P <- &('a' 'b' 'c') . . .
//! ```
//!
//! Terminals are single-quoted characters with escapes `\'`, `\\`, `\n`,
//! `\t`, `\xHH`; a multi-character literal is sugar for the sequence of its
//! characters and `''` is ε. `.` is the wildcard, `%fail` the failing
//! expression. Postfix `*`, `+` (one or more), `?` (optional); prefix `!`
//! and `&`; juxtaposition sequences; `/` is prioritized choice, lowest
//! precedence and right-associative. Precedence: postfix > prefix >
//! sequence > choice.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::expr::{ExprId, Terminal};
use crate::grammar::{escape_char, Grammar};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Lit(Vec<char>),
    Dot,
    Star,
    Plus,
    Question,
    Bang,
    Amp,
    Slash,
    LParen,
    RParen,
    Arrow,
    DirAlphabet,
    DirStart,
    KwFail,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn lex(mut self) -> Result<Vec<Spanned>> {
        let mut out = Vec::new();
        loop {
            while let Some(&c) = self.chars.peek() {
                if c == '#' {
                    while let Some(&c) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else if c.is_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.bump() else { break };
            let tok = match c {
                '.' => Tok::Dot,
                '*' => Tok::Star,
                '+' => Tok::Plus,
                '?' => Tok::Question,
                '!' => Tok::Bang,
                '&' => Tok::Amp,
                '/' => Tok::Slash,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '<' => {
                    if self.chars.peek() == Some(&'-') {
                        self.bump();
                        Tok::Arrow
                    } else {
                        return Err(err(line, col, "expected `<-`"));
                    }
                }
                '%' => {
                    let word = self.ident_tail(String::new());
                    match word.as_str() {
                        "alphabet" => Tok::DirAlphabet,
                        "start" => Tok::DirStart,
                        "fail" => Tok::KwFail,
                        other => {
                            return Err(err(line, col, format!("unknown directive `%{other}`")))
                        }
                    }
                }
                '\'' => Tok::Lit(self.literal(line, col)?),
                c if c.is_alphanumeric() || c == '_' => Tok::Ident(self.ident_tail(c.to_string())),
                c => return Err(err(line, col, format!("unexpected character {:?}", c))),
            };
            out.push(Spanned { tok, line, col });
        }
        Ok(out)
    }

    fn ident_tail(&mut self, mut word: String) -> String {
        while let Some(&c) = self.chars.peek() {
            if c.is_alphanumeric() || c == '_' {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        word
    }

    fn literal(&mut self, line: usize, col: usize) -> Result<Vec<char>> {
        let mut chars = Vec::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(err(line, col, "unterminated literal"));
            };
            match c {
                '\'' => return Ok(chars),
                '\n' => return Err(err(line, col, "unterminated literal")),
                '\\' => {
                    let (eline, ecol) = (self.line, self.col);
                    let Some(esc) = self.bump() else {
                        return Err(err(eline, ecol, "dangling escape"));
                    };
                    chars.push(match esc {
                        '\'' => '\'',
                        '\\' => '\\',
                        'n' => '\n',
                        't' => '\t',
                        'x' => {
                            let hi = self.hex_digit()?;
                            let lo = self.hex_digit()?;
                            char::from_u32(hi * 16 + lo).unwrap()
                        }
                        other => {
                            return Err(err(eline, ecol, format!("unknown escape \\{other}")))
                        }
                    });
                }
                c => chars.push(c),
            }
        }
    }

    fn hex_digit(&mut self) -> Result<u32> {
        let (line, col) = (self.line, self.col);
        match self.bump().and_then(|c| c.to_digit(16)) {
            Some(d) => Ok(d),
            None => Err(err(line, col, "expected hex digit in \\xHH escape")),
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    grammar: Grammar,
    declared_alphabet: Option<Vec<Terminal>>,
    used_terminals: Vec<Terminal>,
    wildcard_at: Option<(usize, usize)>,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn peek2(&self) -> Option<&Spanned> {
        self.toks.get(self.pos + 1)
    }

    fn at_rule_head(&self) -> bool {
        matches!(self.peek().map(|s| &s.tok), Some(Tok::Ident(_)))
            && matches!(self.peek2().map(|s| &s.tok), Some(Tok::Arrow))
    }

    fn end_pos(&self) -> (usize, usize) {
        self.toks
            .last()
            .map(|s| (s.line, s.col + 1))
            .unwrap_or((1, 1))
    }

    fn take_literal(&mut self, what: &str) -> Result<(Vec<char>, usize, usize)> {
        match self.peek().cloned() {
            Some(Spanned {
                tok: Tok::Lit(cs),
                line,
                col,
            }) => {
                self.pos += 1;
                Ok((cs, line, col))
            }
            Some(s) => Err(err(s.line, s.col, format!("expected {what}"))),
            None => {
                let (l, c) = self.end_pos();
                Err(err(l, c, format!("expected {what}, found end of input")))
            }
        }
    }

    fn parse(mut self) -> Result<Grammar> {
        // First pass: register every defined rule so references resolve in
        // definition order regardless of where they appear.
        let mut i = 0;
        let mut start_directive: Option<(String, usize, usize)> = None;
        while i < self.toks.len() {
            if let (Tok::Ident(name), Some(Tok::Arrow)) =
                (&self.toks[i].tok, self.toks.get(i + 1).map(|s| &s.tok))
            {
                if self.grammar.lookup_rule(name).is_some() {
                    return Err(err(
                        self.toks[i].line,
                        self.toks[i].col,
                        format!("duplicate rule `{name}`"),
                    ));
                }
                self.grammar.declare_rule(name.clone());
                i += 2;
            } else {
                i += 1;
            }
        }

        while let Some(s) = self.peek().cloned() {
            match &s.tok {
                Tok::DirAlphabet => {
                    self.pos += 1;
                    if self.declared_alphabet.is_some() {
                        return Err(err(s.line, s.col, "duplicate %alphabet directive"));
                    }
                    let mut symbols = Vec::new();
                    while matches!(self.peek().map(|t| &t.tok), Some(Tok::Lit(_))) {
                        let (cs, line, col) = self.take_literal("alphabet symbol")?;
                        if cs.len() != 1 {
                            return Err(err(
                                line,
                                col,
                                "alphabet entries must be single-character literals",
                            ));
                        }
                        if symbols.contains(&cs[0]) {
                            return Err(err(
                                line,
                                col,
                                format!("duplicate alphabet symbol {:?}", cs[0]),
                            ));
                        }
                        symbols.push(cs[0]);
                    }
                    if symbols.is_empty() {
                        return Err(err(s.line, s.col, "%alphabet needs at least one symbol"));
                    }
                    self.declared_alphabet = Some(symbols);
                }
                Tok::DirStart => {
                    self.pos += 1;
                    if start_directive.is_some() {
                        return Err(err(s.line, s.col, "duplicate %start directive"));
                    }
                    match self.peek().cloned() {
                        Some(Spanned {
                            tok: Tok::Ident(name),
                            line,
                            col,
                        }) => {
                            self.pos += 1;
                            start_directive = Some((name, line, col));
                        }
                        _ => return Err(err(s.line, s.col, "%start needs a rule name")),
                    }
                }
                Tok::Ident(name) if self.at_rule_head() => {
                    let name = name.clone();
                    self.pos += 2;
                    let body = self.parse_choice()?;
                    let rule = self.grammar.lookup_rule(&name).unwrap();
                    self.grammar.set_body(rule, body);
                }
                _ => return Err(err(s.line, s.col, "expected a rule or directive")),
            }
        }

        if self.grammar.rule_count() == 0 {
            return Err(err(1, 1, "grammar defines no rules"));
        }

        // Alphabet: declared, else inferred from the terminals that appear.
        let alphabet: Vec<Terminal> = match &self.declared_alphabet {
            Some(symbols) => symbols.clone(),
            None => self.used_terminals.clone(),
        };
        let mut g = self.grammar;
        g.extend_alphabet(alphabet);
        if let Some(symbols) = &self.declared_alphabet {
            let declared: HashSet<Terminal> = symbols.iter().copied().collect();
            for &t in &self.used_terminals {
                if !declared.contains(&t) {
                    return Err(err(
                        1,
                        1,
                        format!("terminal {:?} is not in the declared %alphabet", t),
                    ));
                }
            }
        }
        if let Some((line, col)) = self.wildcard_at {
            if g.alphabet().is_empty() {
                return Err(err(
                    line,
                    col,
                    "`.` needs a non-empty alphabet (declare one with %alphabet)",
                ));
            }
        }

        let start_rule = match start_directive {
            Some((name, line, col)) => g
                .lookup_rule(&name)
                .ok_or_else(|| err(line, col, format!("%start names undefined rule `{name}`")))?,
            None => g.rule_ids().next().unwrap(),
        };
        let start = g.pool_mut().mk_nonterm(start_rule);
        g.set_start(start);
        Ok(g)
    }

    fn parse_choice(&mut self) -> Result<ExprId> {
        let first = self.parse_seq()?;
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::Slash)) {
            self.pos += 1;
            let rest = self.parse_choice()?;
            Ok(self.grammar.pool_mut().mk_choice(first, rest))
        } else {
            Ok(first)
        }
    }

    fn parse_seq(&mut self) -> Result<ExprId> {
        let mut parts = vec![self.parse_prefix()?];
        while self.starts_prefix() {
            parts.push(self.parse_prefix()?);
        }
        let mut acc = parts.pop().unwrap();
        while let Some(e) = parts.pop() {
            acc = self.grammar.pool_mut().mk_seq(e, acc);
        }
        Ok(acc)
    }

    fn starts_prefix(&self) -> bool {
        match self.peek().map(|s| &s.tok) {
            Some(Tok::Ident(_)) => !self.at_rule_head(),
            Some(Tok::Lit(_) | Tok::Dot | Tok::KwFail | Tok::Bang | Tok::Amp | Tok::LParen) => {
                true
            }
            _ => false,
        }
    }

    fn parse_prefix(&mut self) -> Result<ExprId> {
        match self.peek().map(|s| s.tok.clone()) {
            Some(Tok::Bang) => {
                self.pos += 1;
                let inner = self.parse_prefix()?;
                Ok(self.grammar.pool_mut().mk_not(inner))
            }
            Some(Tok::Amp) => {
                self.pos += 1;
                let inner = self.parse_prefix()?;
                Ok(self.grammar.pool_mut().mk_and(inner))
            }
            _ => self.parse_postfix(),
        }
    }

    fn parse_postfix(&mut self) -> Result<ExprId> {
        let mut e = self.parse_primary()?;
        loop {
            match self.peek().map(|s| &s.tok) {
                Some(Tok::Star) => {
                    self.pos += 1;
                    e = self.grammar.pool_mut().mk_star(e);
                }
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let star = self.grammar.pool_mut().mk_star(e);
                    e = self.grammar.pool_mut().mk_seq(e, star);
                }
                Some(Tok::Question) => {
                    self.pos += 1;
                    let eps = self.grammar.pool().mk_empty();
                    e = self.grammar.pool_mut().mk_choice(e, eps);
                }
                _ => return Ok(e),
            }
        }
    }

    fn parse_primary(&mut self) -> Result<ExprId> {
        let Some(s) = self.peek().cloned() else {
            let (l, c) = self.end_pos();
            return Err(err(l, c, "expected an expression, found end of input"));
        };
        match s.tok {
            Tok::Lit(cs) => {
                self.pos += 1;
                if cs.is_empty() {
                    return Ok(self.grammar.pool().mk_empty());
                }
                let mut acc = None;
                for &c in cs.iter().rev() {
                    if !self.used_terminals.contains(&c) {
                        self.used_terminals.push(c);
                    }
                    let t = self.grammar.pool_mut().mk_term(c);
                    acc = Some(match acc {
                        None => t,
                        Some(rest) => self.grammar.pool_mut().mk_seq(t, rest),
                    });
                }
                Ok(acc.unwrap())
            }
            Tok::Dot => {
                self.pos += 1;
                if self.wildcard_at.is_none() {
                    self.wildcard_at = Some((s.line, s.col));
                }
                Ok(self.grammar.pool().mk_wild())
            }
            Tok::KwFail => {
                self.pos += 1;
                Ok(self.grammar.pool().mk_fail())
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match self.grammar.lookup_rule(&name) {
                    Some(rule) => Ok(self.grammar.pool_mut().mk_nonterm(rule)),
                    None => Err(err(
                        s.line,
                        s.col,
                        format!("reference to undefined rule `{name}`"),
                    )),
                }
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.parse_choice()?;
                match self.peek().map(|t| &t.tok) {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(err(s.line, s.col, "unclosed `(`")),
                }
            }
            _ => Err(err(s.line, s.col, "expected an expression")),
        }
    }
}

/// Parses grammar text into a [`Grammar`].
pub fn parse_grammar(text: &str) -> Result<Grammar> {
    let toks = Lexer::new(text).lex()?;
    Parser {
        toks,
        pos: 0,
        grammar: Grammar::new([]),
        declared_alphabet: None,
        used_terminals: Vec::new(),
        wildcard_at: None,
    }
    .parse()
}

/// Canonical text for a grammar: explicit `%alphabet` and `%start`
/// directives followed by one line per rule in rule-id order.
///
/// Panics if the grammar still contains unforced derived cells; use
/// [`crate::derive::Session::serialize_env`] for live sessions.
pub fn serialize_grammar(g: &Grammar) -> String {
    let ids: Vec<_> = g.rule_ids().collect();
    render(g, &ids, None)
}

pub(crate) fn render(
    g: &Grammar,
    rules: &[crate::expr::RuleId],
    start_line: Option<(&str, ExprId)>,
) -> String {
    let mut out = String::new();
    if !g.alphabet().is_empty() {
        out.push_str("%alphabet");
        for &a in g.alphabet() {
            out.push_str(" '");
            out.push_str(&escape_char(a));
            out.push('\'');
        }
        out.push('\n');
    }
    match start_line {
        Some((name, body)) => {
            out.push_str(&format!("%start {name}\n"));
            out.push_str(&format!("{name} <- {}\n", g.pretty(body)));
        }
        None => {
            if let crate::expr::ExprNode::Nonterm(r) = g.pool().node(g.start()) {
                out.push_str(&format!("%start {}\n", g.rule_name(r)));
            }
        }
    }
    for &r in rules {
        let body = g
            .defined_body(r)
            .expect("cannot serialize an unforced derived rule");
        out.push_str(&format!("{} <- {}\n", g.rule_name(r), g.pretty(body)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ExprNode;

    #[test]
    fn parses_anbn() {
        let g = parse_grammar("S <- 'a' S 'b' / ''").unwrap();
        assert_eq!(g.alphabet(), &['a', 'b']);
        let s = g.lookup_rule("S").unwrap();
        let body = g.defined_body(s).unwrap();
        // Choice(Seq(a, Seq(S, b)), ε)
        let ExprNode::Choice(l, r) = g.pool().node(body) else {
            panic!("expected choice")
        };
        assert_eq!(g.pool().node(r), ExprNode::Empty);
        let ExprNode::Seq(a, tail) = g.pool().node(l) else {
            panic!("expected seq")
        };
        assert_eq!(g.pool().node(a), ExprNode::Term('a'));
        let ExprNode::Seq(s_ref, b) = g.pool().node(tail) else {
            panic!("expected nested seq")
        };
        assert_eq!(g.pool().node(s_ref), ExprNode::Nonterm(s));
        assert_eq!(g.pool().node(b), ExprNode::Term('b'));
        assert_eq!(g.pool().node(g.start()), ExprNode::Nonterm(s));
    }

    #[test]
    fn parses_lookahead_example() {
        let g = parse_grammar("P <- &('a' 'b' 'c') . . .").unwrap();
        let p = g.lookup_rule("P").unwrap();
        assert_eq!(g.pretty(g.defined_body(p).unwrap()), "&('a' 'b' 'c') . . .");
        assert_eq!(g.alphabet(), &['a', 'b', 'c']);
    }

    #[test]
    fn left_recursion_parses_fine() {
        // Well-formedness is not this module's business.
        let g = parse_grammar("X <- X 'x' / ''").unwrap();
        assert!(g.lookup_rule("X").is_some());
    }

    #[test]
    fn sugar_desugars() {
        let g = parse_grammar("S <- 'ab'+ 'c'?").unwrap();
        let s = g.lookup_rule("S").unwrap();
        // `e+` is one unit (`e e*`), so it nests to the left of the outer
        // sequence; sequencing is associative so this is only cosmetic.
        assert_eq!(
            g.pretty(g.defined_body(s).unwrap()),
            "(('a' 'b') ('a' 'b')*) ('c' / '')"
        );
    }

    #[test]
    fn directives_and_escapes() {
        let g = parse_grammar(
            "# demo\n%alphabet 'a' '\\n'\n%start B\nA <- 'a'\nB <- A '\\n'\n",
        )
        .unwrap();
        assert_eq!(g.alphabet(), &['\n', 'a']);
        let b = g.lookup_rule("B").unwrap();
        assert_eq!(g.pretty(g.defined_body(b).unwrap()), "A '\\n'");
        let ExprNode::Nonterm(start) = g.pool().node(g.start()) else {
            panic!()
        };
        assert_eq!(g.rule_name(start), "B");
    }

    #[test]
    fn errors_have_positions() {
        let e = parse_grammar("S <- 'a' )").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, col: 10, .. }), "{e:?}");
        let e = parse_grammar("S <- T").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, col: 6, .. }), "{e:?}");
        let e = parse_grammar("S <- 'a'\nS <- 'b'").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, col: 1, .. }), "{e:?}");
        let e = parse_grammar("S <- .").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{e:?}");
        let e = parse_grammar("%alphabet 'a'\nS <- 'b'").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{e:?}");
        let e = parse_grammar("%start T\nS <- 'a'").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, col: 8, .. }), "{e:?}");
    }

    #[test]
    fn serialize_round_trip_is_canonical() {
        let src = "B <- 'b'\nS <- 'a' S 'b' / '' # trailing\n%start S\n";
        let g1 = parse_grammar(src).unwrap();
        let t1 = serialize_grammar(&g1);
        let g2 = parse_grammar(&t1).unwrap();
        let t2 = serialize_grammar(&g2);
        assert_eq!(t1, t2);
        assert_eq!(t1, "%alphabet 'a' 'b'\n%start S\nB <- 'b'\nS <- 'a' S 'b' / ''\n");
    }

    #[test]
    fn serialize_epsilon_rule() {
        let g = parse_grammar("S <- ''").unwrap();
        assert_eq!(serialize_grammar(&g), "%start S\nS <- ''\n");
    }

    #[test]
    fn multichar_and_fail() {
        let g = parse_grammar("S <- 'ab' / %fail").unwrap();
        let s = g.lookup_rule("S").unwrap();
        assert_eq!(g.pretty(g.defined_body(s).unwrap()), "'a' 'b'");
    }
}

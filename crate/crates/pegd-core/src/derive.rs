//! The derivative function `D` and the nullability combinator `δ`, with
//! memoization and lazy derived rules.
//!
//! `D_a e` is the grammar for the rest of the input after consuming `a`;
//! `δ_a e` stands in for "e can succeed here without consuming input" inside
//! the sequence rule, stepping any lookahead in `e` past `a` as it does so.
//!
//! Taking the derivative of a nonterminal or of a star does not recurse into
//! the definition. Instead it allocates a fresh *derived rule* whose body is
//! a [`DerivedCell`] computed on first use; the memo table already maps the
//! (operator, source, terminal) triple to a reference to that rule, so a
//! self-referential right-hand side resolves to the rule itself instead of
//! recursing forever. That is the whole cycle-breaking story.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expr::{ExprId, ExprNode, RuleId, Terminal};
use crate::grammar::{CellRecipe, DeriveOp, DerivedCell, Grammar, RuleBody};

pub(crate) type MemoKey = (DeriveOp, ExprId, Terminal);

const DEFAULT_DERIVED_RULE_CAP: usize = 100_000;

/// A derivation session: a grammar plus the growing environment of derived
/// rules and the `D`/`δ` memo tables.
///
/// A session is single-owner mutable state; derivative, analysis, and match
/// calls against one session must be serialized. Independent sessions share
/// nothing.
#[derive(Debug)]
pub struct Session {
    g: Grammar,
    memo: HashMap<MemoKey, ExprId>,
    derived_count: usize,
    derived_rule_cap: usize,
    // Analysis caches. Rule bodies are write-once and new expressions only
    // reference older ones, so cached values never go stale.
    pub(crate) nu_rules: HashMap<RuleId, bool>,
    pub(crate) nu_exprs: HashMap<ExprId, bool>,
    pub(crate) wf_rules: HashMap<RuleId, bool>,
    pub(crate) wf_exprs: HashMap<ExprId, bool>,
    pub(crate) firsts_rules: HashMap<RuleId, (Vec<Terminal>, Vec<Terminal>)>,
    pub(crate) firsts_exprs: HashMap<ExprId, Vec<Terminal>>,
}

impl Session {
    pub fn new(grammar: Grammar) -> Self {
        Session {
            g: grammar,
            memo: HashMap::new(),
            derived_count: 0,
            derived_rule_cap: DEFAULT_DERIVED_RULE_CAP,
            nu_rules: HashMap::new(),
            nu_exprs: HashMap::new(),
            wf_rules: HashMap::new(),
            wf_exprs: HashMap::new(),
            firsts_rules: HashMap::new(),
            firsts_exprs: HashMap::new(),
        }
    }

    pub fn grammar(&self) -> &Grammar {
        &self.g
    }

    pub fn grammar_mut(&mut self) -> &mut Grammar {
        &mut self.g
    }

    pub fn into_grammar(self) -> Grammar {
        self.g
    }

    pub fn derived_rule_count(&self) -> usize {
        self.derived_count
    }

    /// Caps the number of derived rules this session may allocate.
    pub fn set_derived_rule_cap(&mut self, cap: usize) {
        self.derived_rule_cap = cap;
    }

    /// The body of a rule, forcing it first if it is an unforced cell.
    pub fn rule_body(&mut self, rule: RuleId) -> Result<ExprId> {
        self.g.check_rule(rule)?;
        match self.g.rule(rule).unwrap().body {
            RuleBody::Defined(e) | RuleBody::Cell(DerivedCell::Forced(e)) => Ok(e),
            RuleBody::Cell(DerivedCell::Unforced(recipe)) => self.force(rule, recipe),
            RuleBody::Cell(DerivedCell::Forcing(_)) => {
                // Re-entrant demand while the cell is being computed: answer
                // with the rule's own reference, keeping the cycle in place.
                Ok(self.g.pool_mut().mk_nonterm(rule))
            }
        }
    }

    fn force(&mut self, rule: RuleId, recipe: CellRecipe) -> Result<ExprId> {
        *self.g.cell_mut(rule) = RuleBody::Cell(DerivedCell::Forcing(recipe));
        let body = match self.g.pool().node(recipe.source) {
            ExprNode::Nonterm(source_rule) => {
                let source_body = self.rule_body(source_rule)?;
                self.apply(recipe.op, recipe.terminal, source_body)
            }
            ExprNode::Star(inner) => {
                let self_ref = self.g.pool_mut().mk_nonterm(rule);
                match recipe.op {
                    // D_a e* = D_a e e* / δ_a e (D_a e*)
                    DeriveOp::Deriv => {
                        let de = self.apply(DeriveOp::Deriv, recipe.terminal, inner)?;
                        let star = self.g.pool_mut().mk_star(inner);
                        let left = self.g.pool_mut().mk_seq(de, star);
                        let dlt = self.apply(DeriveOp::Delta, recipe.terminal, inner)?;
                        let right = self.g.pool_mut().mk_seq(dlt, self_ref);
                        Ok(self.g.pool_mut().mk_choice(left, right))
                    }
                    // δ_a e* = δ_a e (δ_a e*) / δ_a !e.
                    //
                    // This follows from unfolding e* = e e* / ε through the
                    // sequence and choice rules: the exit branch is
                    // δ_a !(e e*) δ_a ε, and !D_a(e e* _*) collapses to
                    // !D_a(e _*) = δ_a !e. The exit branch must not loop
                    // back into δ_a e*, otherwise the equation has no base
                    // case and a star could never stand for ε (e.g.
                    // δ_b('a'*) has to be ε for 'a'* 'b' to match "b…").
                    DeriveOp::Delta => {
                        let dlt = self.apply(DeriveOp::Delta, recipe.terminal, inner)?;
                        let left = self.g.pool_mut().mk_seq(dlt, self_ref);
                        let not_inner = self.g.pool_mut().mk_not(inner);
                        let dlt_not = self.apply(DeriveOp::Delta, recipe.terminal, not_inner)?;
                        Ok(self.g.pool_mut().mk_choice(left, dlt_not))
                    }
                }
            }
            other => unreachable!("derived cell with non-rule, non-star source: {other:?}"),
        }?;
        *self.g.cell_mut(rule) = RuleBody::Cell(DerivedCell::Forced(body));
        Ok(body)
    }

    /// `D_a e`.
    pub fn derive(&mut self, a: Terminal, e: ExprId) -> Result<ExprId> {
        if !self.g.has_symbol(a) {
            return Err(Error::TerminalNotInAlphabet(a));
        }
        self.apply(DeriveOp::Deriv, a, e)
    }

    /// `δ_a e`.
    pub fn delta(&mut self, a: Terminal, e: ExprId) -> Result<ExprId> {
        if !self.g.has_symbol(a) {
            return Err(Error::TerminalNotInAlphabet(a));
        }
        self.apply(DeriveOp::Delta, a, e)
    }

    /// `D_x e` for a whole token string: the left fold of `derive`.
    pub fn derive_string<I>(&mut self, tokens: I, e: ExprId) -> Result<ExprId>
    where
        I: IntoIterator<Item = Terminal>,
    {
        let mut acc = e;
        for a in tokens {
            acc = self.derive(a, acc)?;
        }
        Ok(acc)
    }

    fn apply(&mut self, op: DeriveOp, a: Terminal, e: ExprId) -> Result<ExprId> {
        if let Some(&hit) = self.memo.get(&(op, e, a)) {
            return Ok(hit);
        }
        let result = match op {
            DeriveOp::Deriv => self.deriv_uncached(a, e)?,
            DeriveOp::Delta => self.delta_uncached(a, e)?,
        };
        // Nonterm/star cases insert their own memo entry when they allocate
        // the derived rule; everything else lands here exactly once.
        self.memo.entry((op, e, a)).or_insert(result);
        Ok(result)
    }

    fn deriv_uncached(&mut self, a: Terminal, e: ExprId) -> Result<ExprId> {
        let pool = self.g.pool();
        Ok(match pool.node(e) {
            ExprNode::Empty => pool.mk_fail(),
            ExprNode::Fail => pool.mk_fail(),
            ExprNode::Wildcard => pool.mk_empty(),
            ExprNode::Term(b) => {
                if a == b {
                    pool.mk_empty()
                } else {
                    pool.mk_fail()
                }
            }
            // Lookahead consumes nothing, so it has no derivative by `a`.
            ExprNode::Not(_) | ExprNode::And(_) => pool.mk_fail(),
            ExprNode::Nonterm(_) | ExprNode::Star(_) => self.alloc_cell(DeriveOp::Deriv, a, e)?,
            // D_a (e1 e2) = D_a e1 e2 / δ_a e1 D_a e2
            ExprNode::Seq(e1, e2) => {
                let d1 = self.apply(DeriveOp::Deriv, a, e1)?;
                let left = self.g.pool_mut().mk_seq(d1, e2);
                let n1 = self.apply(DeriveOp::Delta, a, e1)?;
                let d2 = self.apply(DeriveOp::Deriv, a, e2)?;
                let right = self.g.pool_mut().mk_seq(n1, d2);
                self.g.pool_mut().mk_choice(left, right)
            }
            // D_a (e1 / e2) = D_a e1 / δ_a !e1 D_a e2.
            //
            // The guard keeps the branches disjoint exactly as in the δ
            // rule for choice. Distributing D without it over-accepts
            // whenever e1 can succeed without consuming: '' / 'a' 'b' is
            // equivalent to '' alone (the second branch is dead), yet the
            // unguarded D_a would yield 'b'. δ_a !e1 = !D_a(e1 _*) fails
            // precisely when e1 succeeds in any way on an a-led input, so
            // the dead branch stays dead.
            ExprNode::Choice(e1, e2) => {
                let d1 = self.apply(DeriveOp::Deriv, a, e1)?;
                let not1 = self.g.pool_mut().mk_not(e1);
                let guard = self.apply(DeriveOp::Delta, a, not1)?;
                let d2 = self.apply(DeriveOp::Deriv, a, e2)?;
                let gated = self.g.pool_mut().mk_seq(guard, d2);
                self.g.pool_mut().mk_choice(d1, gated)
            }
        })
    }

    fn delta_uncached(&mut self, a: Terminal, e: ExprId) -> Result<ExprId> {
        let pool = self.g.pool();
        Ok(match pool.node(e) {
            ExprNode::Empty => pool.mk_empty(),
            ExprNode::Fail => pool.mk_fail(),
            ExprNode::Wildcard => pool.mk_fail(),
            // A terminal always consumes, so it never stands for ε.
            ExprNode::Term(_) => pool.mk_fail(),
            // δ_a !e = !D_a(e _*): step the lookahead past `a` in parallel
            // with the rest of the grammar.
            ExprNode::Not(inner) => {
                let sw = self.g.pool().star_wild();
                let embedded = self.g.pool_mut().mk_seq(inner, sw);
                let d = self.apply(DeriveOp::Deriv, a, embedded)?;
                self.g.pool_mut().mk_not(d)
            }
            // δ_a &e = &D_a(e _*), the !!e reading of positive lookahead.
            ExprNode::And(inner) => {
                let sw = self.g.pool().star_wild();
                let embedded = self.g.pool_mut().mk_seq(inner, sw);
                let d = self.apply(DeriveOp::Deriv, a, embedded)?;
                self.g.pool_mut().mk_and(d)
            }
            ExprNode::Nonterm(_) | ExprNode::Star(_) => self.alloc_cell(DeriveOp::Delta, a, e)?,
            // δ_a (e1 e2) = δ_a e1 δ_a e2
            ExprNode::Seq(e1, e2) => {
                let n1 = self.apply(DeriveOp::Delta, a, e1)?;
                let n2 = self.apply(DeriveOp::Delta, a, e2)?;
                self.g.pool_mut().mk_seq(n1, n2)
            }
            // δ_a (e1 / e2) = δ_a e1 / δ_a !e1 δ_a e2: the guard keeps the
            // branches disjoint so e2 only counts when e1 has failed.
            ExprNode::Choice(e1, e2) => {
                let n1 = self.apply(DeriveOp::Delta, a, e1)?;
                let not1 = self.g.pool_mut().mk_not(e1);
                let guard = self.apply(DeriveOp::Delta, a, not1)?;
                let n2 = self.apply(DeriveOp::Delta, a, e2)?;
                let gated = self.g.pool_mut().mk_seq(guard, n2);
                self.g.pool_mut().mk_choice(n1, gated)
            }
        })
    }

    fn alloc_cell(&mut self, op: DeriveOp, a: Terminal, source: ExprId) -> Result<ExprId> {
        if self.derived_count >= self.derived_rule_cap {
            return Err(Error::DerivedRuleBudgetExhausted(self.derived_rule_cap));
        }
        let tag = match op {
            DeriveOp::Deriv => 'D',
            DeriveOp::Delta => 'N',
        };
        let name = format!("_{}_{}_{}", tag, symbol_tag(a), self.derived_count);
        let name = self.g.fresh_rule_name(&name);
        let rule = self.g.push_cell(
            name,
            CellRecipe {
                op,
                source,
                terminal: a,
            },
        );
        self.derived_count += 1;
        let reference = self.g.pool_mut().mk_nonterm(rule);
        self.memo.insert((op, source, a), reference);
        Ok(reference)
    }

    /// Replaces nonterminal references by their (forced) bodies up to
    /// `depth` nesting levels, re-simplifying through the smart
    /// constructors. Depth 0 is the identity; references deeper than the
    /// budget stay as references.
    pub fn inline(&mut self, e: ExprId, depth: usize) -> Result<ExprId> {
        let mut memo = HashMap::new();
        self.inline_rec(e, depth, &mut memo)
    }

    fn inline_rec(
        &mut self,
        e: ExprId,
        depth: usize,
        memo: &mut HashMap<(ExprId, usize), ExprId>,
    ) -> Result<ExprId> {
        if let Some(&hit) = memo.get(&(e, depth)) {
            return Ok(hit);
        }
        let result = match self.g.pool().node(e) {
            ExprNode::Nonterm(rule) if depth > 0 => {
                let body = self.rule_body(rule)?;
                self.inline_rec(body, depth - 1, memo)?
            }
            ExprNode::Seq(l, r) => {
                let l = self.inline_rec(l, depth, memo)?;
                let r = self.inline_rec(r, depth, memo)?;
                self.g.pool_mut().mk_seq(l, r)
            }
            ExprNode::Choice(l, r) => {
                let l = self.inline_rec(l, depth, memo)?;
                let r = self.inline_rec(r, depth, memo)?;
                self.g.pool_mut().mk_choice(l, r)
            }
            ExprNode::Star(inner) => {
                let inner = self.inline_rec(inner, depth, memo)?;
                self.g.pool_mut().mk_star(inner)
            }
            ExprNode::Not(inner) => {
                let inner = self.inline_rec(inner, depth, memo)?;
                self.g.pool_mut().mk_not(inner)
            }
            ExprNode::And(inner) => {
                let inner = self.inline_rec(inner, depth, memo)?;
                self.g.pool_mut().mk_and(inner)
            }
            _ => e,
        };
        memo.insert((e, depth), result);
        Ok(result)
    }

    /// Serializes the environment reachable from `root` as grammar text:
    /// a `_start` rule for the root expression followed by every reachable
    /// rule (forcing cells as needed), each exactly once, in rule-id order.
    pub fn serialize_env(&mut self, root: ExprId) -> Result<String> {
        let mut reachable = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut queue = vec![root];
        while let Some(e) = queue.pop() {
            if !seen.insert(e) {
                continue;
            }
            match self.g.pool().node(e) {
                ExprNode::Nonterm(rule) => {
                    if !reachable.contains(&rule) {
                        reachable.push(rule);
                        queue.push(self.rule_body(rule)?);
                    }
                }
                ExprNode::Seq(l, r) | ExprNode::Choice(l, r) => {
                    queue.push(l);
                    queue.push(r);
                }
                ExprNode::Star(i) | ExprNode::Not(i) | ExprNode::And(i) => queue.push(i),
                _ => {}
            }
        }
        reachable.sort_unstable();
        let start_name = self.g.fresh_rule_name("_start");
        Ok(crate::text::render(
            &self.g,
            &reachable,
            Some((&start_name, root)),
        ))
    }
}

fn symbol_tag(a: Terminal) -> String {
    if a.is_alphanumeric() {
        a.to_string()
    } else {
        format!("x{:02X}", a as u32)
    }
}
